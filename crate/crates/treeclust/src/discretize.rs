//! Per-feature discretization: exact 1D k-means with BIC model selection, or
//! tercile binning, both extended with merged adjacent intervals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiscretizeError {
    #[error("k = {k} exceeds the {distinct} distinct values")]
    KTooLarge { k: usize, distinct: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("no values to discretize")]
    NoValues,
    #[error("need at least 2 centroids to place boundaries, got {0}")]
    TooFewCentroids(usize),
}

/// Half-open interval [lower, upper); infinite bounds mark the outer bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower < upper, "interval must be non-empty: [{lower}, {upper})");
        Self { lower, upper }
    }

    pub fn full() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn is_full(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x < self.upper
    }
}

// Model JSON writes infinite bounds as null.
#[derive(Serialize, Deserialize)]
struct IntervalDto {
    lower: Option<f64>,
    upper: Option<f64>,
}

impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        IntervalDto {
            lower: (self.lower != f64::NEG_INFINITY).then_some(self.lower),
            upper: (self.upper != f64::INFINITY).then_some(self.upper),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let dto = IntervalDto::deserialize(de)?;
        Ok(Interval::new(
            dto.lower.unwrap_or(f64::NEG_INFINITY),
            dto.upper.unwrap_or(f64::INFINITY),
        ))
    }
}

/// Discretization of one feature: disjoint base intervals covering the whole
/// line, plus every union of two or more consecutive base intervals short of
/// the full range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinSet {
    pub feature_index: usize,
    pub base: Vec<Interval>,
    pub merged: Vec<Interval>,
    /// Cluster count chosen by BIC; absent for the tercile strategy.
    pub k_selected: Option<usize>,
}

impl BinSet {
    /// Base bins followed by merged bins; the node order of this feature's
    /// graph layer.
    pub fn bins(&self) -> impl Iterator<Item = &Interval> {
        self.base.iter().chain(self.merged.iter())
    }

    pub fn n_bins(&self) -> usize {
        self.base.len() + self.merged.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    KMeans,
    Tercile,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kmeans" => Ok(Self::KMeans),
            "tercile" => Ok(Self::Tercile),
            other => Err(format!("unknown strategy {other:?} (use kmeans or tercile)")),
        }
    }
}

/// Output of exact univariate k-means.
#[derive(Debug, Clone)]
pub struct KMeans1DResult {
    /// Cluster means, strictly increasing.
    pub centroids: Vec<f64>,
    /// Cluster id per input value, in input order.
    pub assignment: Vec<usize>,
    /// Total within-cluster sum of squares.
    pub sse: f64,
}

fn distinct_count(sorted: &[f64]) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    1 + sorted.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Globally optimal k-partition of the values minimizing within-cluster sum
/// of squares. Optimal univariate clusters are contiguous in sorted order, so
/// a dynamic program over the sorted values finds the exact optimum; ties are
/// broken toward the smallest split indices, making the result deterministic.
pub fn kmeans_1d(values: &[f64], k: usize) -> Result<KMeans1DResult, DiscretizeError> {
    if k == 0 {
        return Err(DiscretizeError::KZero);
    }
    if values.is_empty() {
        return Err(DiscretizeError::NoValues);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let distinct = distinct_count(&sorted);
    if k > distinct {
        return Err(DiscretizeError::KTooLarge { k, distinct });
    }

    let n = sorted.len();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut prefix_sq = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    prefix_sq.push(0.0);
    for &v in &sorted {
        prefix.push(prefix.last().unwrap() + v);
        prefix_sq.push(prefix_sq.last().unwrap() + v * v);
    }
    // SSE of sorted[i..=j].
    let seg_sse = |i: usize, j: usize| -> f64 {
        let cnt = (j - i + 1) as f64;
        let sum = prefix[j + 1] - prefix[i];
        let sq = prefix_sq[j + 1] - prefix_sq[i];
        (sq - sum * sum / cnt).max(0.0)
    };

    // dp[c][j]: best cost of grouping sorted[0..=j] into c+1 clusters.
    let mut dp = vec![vec![f64::INFINITY; n]; k];
    let mut back = vec![vec![0usize; n]; k];
    for j in 0..n {
        dp[0][j] = seg_sse(0, j);
    }
    for c in 1..k {
        for j in c..n {
            // last cluster starts at s; smallest s wins cost ties
            for s in c..=j {
                let cost = dp[c - 1][s - 1] + seg_sse(s, j);
                if cost < dp[c][j] {
                    dp[c][j] = cost;
                    back[c][j] = s;
                }
            }
        }
    }

    // Recover segment starts.
    let mut starts = vec![0usize; k];
    let mut j = n - 1;
    for c in (1..k).rev() {
        starts[c] = back[c][j];
        j = starts[c] - 1;
    }
    let mut centroids = Vec::with_capacity(k);
    let mut sorted_assign = vec![0usize; n];
    let mut sse = 0.0;
    for c in 0..k {
        let lo = starts[c];
        let hi = if c + 1 < k { starts[c + 1] - 1 } else { n - 1 };
        let cnt = (hi - lo + 1) as f64;
        centroids.push((prefix[hi + 1] - prefix[lo]) / cnt);
        sse += seg_sse(lo, hi);
        for pos in lo..=hi {
            sorted_assign[pos] = c;
        }
    }

    let mut assignment = vec![0usize; n];
    for (pos, &orig) in order.iter().enumerate() {
        assignment[orig] = sorted_assign[pos];
    }
    Ok(KMeans1DResult {
        centroids,
        assignment,
        sse,
    })
}

/// Bayesian information criterion for a k-cluster fit of n points:
/// n*ln(SSE/n) + k*ln(n). SSE is clamped below at 1e-12 because
/// duplicate-heavy columns legitimately reach zero.
pub fn bic(n: usize, sse: f64, k: usize) -> f64 {
    debug_assert!(n >= 1 && k >= 1 && sse >= 0.0);
    let n = n as f64;
    n * (sse.max(1e-12) / n).ln() + (k as f64) * n.ln()
}

/// Run [`kmeans_1d`] for each candidate cluster count and keep the one with
/// the smallest BIC, ties toward smaller k. Candidates above the number of
/// distinct values are skipped; if that skips everything, the distinct-value
/// count itself (at least 1) is used.
pub fn select_k(
    values: &[f64],
    k_candidates: std::ops::RangeInclusive<usize>,
) -> Result<(usize, KMeans1DResult), DiscretizeError> {
    if values.is_empty() {
        return Err(DiscretizeError::NoValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let distinct = distinct_count(&sorted);

    let mut best: Option<(f64, usize, KMeans1DResult)> = None;
    for k in k_candidates.clone() {
        if k == 0 || k > distinct {
            continue;
        }
        let result = kmeans_1d(values, k)?;
        let score = bic(values.len(), result.sse, k);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, k, result));
        }
    }
    match best {
        Some((_, k, result)) => Ok((k, result)),
        None => {
            let k = distinct.max(1);
            let result = kmeans_1d(values, k)?;
            Ok((k, result))
        }
    }
}

/// Split boundaries at the midpoints between adjacent centroids.
pub fn boundaries(centroids: &[f64]) -> Result<Vec<f64>, DiscretizeError> {
    if centroids.len() < 2 {
        return Err(DiscretizeError::TooFewCentroids(centroids.len()));
    }
    debug_assert!(centroids.windows(2).all(|w| w[0] < w[1]));
    Ok(centroids.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect())
}

/// Chain of intervals (-inf, b1), [b1, b2), ..., [bk, +inf) from strictly
/// increasing boundaries; no boundaries gives the single full-range interval.
fn bins_from_boundaries(bounds: &[f64]) -> Vec<Interval> {
    if bounds.is_empty() {
        return vec![Interval::full()];
    }
    let mut bins = Vec::with_capacity(bounds.len() + 1);
    let mut lower = f64::NEG_INFINITY;
    for &b in bounds {
        bins.push(Interval::new(lower, b));
        lower = b;
    }
    bins.push(Interval::new(lower, f64::INFINITY));
    bins
}

/// Tercile base bins: boundaries at the order statistics floor(N/3) and
/// floor(2N/3) (0-based). Duplicate boundaries collapse, and a boundary at
/// the column minimum would leave an empty leading interval, so it is
/// dropped; all-equal columns therefore degrade to the single full interval.
pub fn tercile_bins(values: &[f64]) -> Result<Vec<Interval>, DiscretizeError> {
    if values.is_empty() {
        return Err(DiscretizeError::NoValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let min = sorted[0];
    let q1 = sorted[n / 3];
    let q2 = sorted[2 * n / 3];
    let mut bounds = vec![q1, q2];
    bounds.dedup();
    bounds.retain(|&b| b > min);
    Ok(bins_from_boundaries(&bounds))
}

/// Every union of two or more consecutive base intervals, except the one that
/// would span the full range. Ordered by start index, then end index.
pub fn merge_adjacent(base: &[Interval]) -> Vec<Interval> {
    let b = base.len();
    let mut merged = Vec::new();
    for i in 0..b {
        for j in i + 1..b {
            if i == 0 && j == b - 1 {
                continue; // full range
            }
            merged.push(Interval::new(base[i].lower, base[j].upper));
        }
    }
    merged
}

/// Discretize one feature column into its full bin set.
pub fn discretize_feature(
    feature_index: usize,
    values: &[f64],
    strategy: Strategy,
    k_candidates: std::ops::RangeInclusive<usize>,
) -> Result<BinSet, DiscretizeError> {
    let (base, k_selected) = match strategy {
        Strategy::KMeans => {
            let (k, result) = select_k(values, k_candidates)?;
            let base = if k < 2 {
                vec![Interval::full()]
            } else {
                bins_from_boundaries(&boundaries(&result.centroids)?)
            };
            (base, Some(k))
        }
        Strategy::Tercile => (tercile_bins(values)?, None),
    };
    let merged = merge_adjacent(&base);
    Ok(BinSet {
        feature_index,
        base,
        merged,
        k_selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive-search oracle: minimum SSE over all contiguous k-partitions
    /// of the sorted values.
    fn brute_force_sse(values: &[f64], k: usize) -> f64 {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let seg = |lo: usize, hi: usize| -> f64 {
            let s: f64 = sorted[lo..=hi].iter().sum();
            let mean = s / (hi - lo + 1) as f64;
            sorted[lo..=hi].iter().map(|v| (v - mean) * (v - mean)).sum()
        };
        fn rec(
            start: usize,
            clusters_left: usize,
            n: usize,
            seg: &dyn Fn(usize, usize) -> f64,
        ) -> f64 {
            if clusters_left == 1 {
                return seg(start, n - 1);
            }
            let mut best = f64::INFINITY;
            // last point of the current cluster leaves room for the rest
            for end in start..=(n - clusters_left) {
                let cost = seg(start, end) + rec(end + 1, clusters_left - 1, n, seg);
                if cost < best {
                    best = cost;
                }
            }
            best
        }
        rec(0, k, n, &seg)
    }

    #[test]
    fn kmeans_two_pairs() {
        let r = kmeans_1d(&[0.0, 1.0, 10.0, 11.0], 2).unwrap();
        assert_eq!(r.centroids, vec![0.5, 10.5]);
        assert!((r.sse - 1.0).abs() < 1e-12);
        assert_eq!(r.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn kmeans_identical_values_single_cluster() {
        let r = kmeans_1d(&[3.0, 3.0, 3.0], 1).unwrap();
        assert_eq!(r.centroids, vec![3.0]);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn kmeans_one_point_per_cluster() {
        let r = kmeans_1d(&[0.0, 10.0, 20.0], 3).unwrap();
        assert_eq!(r.centroids, vec![0.0, 10.0, 20.0]);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn kmeans_rejects_k_above_distinct() {
        assert!(matches!(
            kmeans_1d(&[1.0, 1.0, 2.0], 3),
            Err(DiscretizeError::KTooLarge { k: 3, distinct: 2 })
        ));
    }

    #[test]
    fn kmeans_handles_unsorted_input() {
        let r = kmeans_1d(&[11.0, 0.0, 10.0, 1.0], 2).unwrap();
        assert_eq!(r.centroids, vec![0.5, 10.5]);
        assert_eq!(r.assignment, vec![1, 0, 1, 0]);
    }

    #[test]
    fn kmeans_matches_exhaustive_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(2..=12);
            let values: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..40) as f64) / 4.0).collect();
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let distinct = distinct_count(&sorted);
            for k in 1..=4.min(distinct) {
                let dp = kmeans_1d(&values, k).unwrap().sse;
                let brute = brute_force_sse(&values, k);
                assert!(
                    (dp - brute).abs() < 1e-9,
                    "dp sse {dp} != brute {brute} on {values:?} k={k}"
                );
            }
        }
    }

    #[test]
    fn kmeans_assignment_is_nearest_centroid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(3..=14);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let k = rng.gen_range(1..=3.min(n));
            let r = kmeans_1d(&values, k).unwrap();
            for (i, &v) in values.iter().enumerate() {
                let own = (v - r.centroids[r.assignment[i]]).abs();
                for &c in &r.centroids {
                    assert!(own <= (v - c).abs() + 1e-9);
                }
            }
            assert!(r.centroids.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn bic_direct_evaluation() {
        let expected = 4.0 * 0.25f64.ln() + 2.0 * 4.0f64.ln();
        assert!((bic(4, 1.0, 2) - expected).abs() < 1e-12);
        assert!((expected - (-2.772588722239781)).abs() < 1e-12);
    }

    #[test]
    fn bic_zero_sse_is_clamped_finite() {
        let v = bic(4, 0.0, 2);
        assert!(v.is_finite());
        assert!(v < -100.0, "clamped zero-SSE BIC should be large negative, got {v}");
    }

    #[test]
    fn bic_single_point_single_cluster_is_zero() {
        assert_eq!(bic(1, 1.0, 1), 0.0);
    }

    #[test]
    fn select_k_two_duplicated_groups() {
        // only k=2 is a valid candidate (2 distinct values), fit is perfect
        let values = [vec![0.0; 10], vec![10.0; 10]].concat();
        let (k, r) = select_k(&values, 2..=6).unwrap();
        assert_eq!(k, 2);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn select_k_skips_candidates_above_distinct() {
        // 3 distinct values: candidates 4..6 are skipped and k=3 fits exactly,
        // which the zero-SSE clamp makes the BIC minimum
        let values = [1.0, 1.0, 5.0, 5.0, 9.0, 9.0];
        let (k, r) = select_k(&values, 2..=6).unwrap();
        assert_eq!(k, 3);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn select_k_matches_independent_bic_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = rng.gen_range(8..=40);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (k_star, _) = select_k(&values, 2..=6).unwrap();
            let mut best = (f64::INFINITY, 0usize);
            for k in 2..=6usize {
                if let Ok(r) = kmeans_1d(&values, k) {
                    let score = bic(n, r.sse, k);
                    if score < best.0 {
                        best = (score, k);
                    }
                }
            }
            assert_eq!(k_star, best.1, "select_k disagrees with direct scan");
        }
    }

    #[test]
    fn select_k_deterministic() {
        let values: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64 / 3.0).collect();
        let (k1, r1) = select_k(&values, 2..=6).unwrap();
        let (k2, r2) = select_k(&values, 2..=6).unwrap();
        assert_eq!(k1, k2);
        assert_eq!(r1.centroids, r2.centroids);
        assert_eq!(r1.assignment, r2.assignment);
    }

    #[test]
    fn select_k_falls_back_when_all_skipped() {
        let (k, r) = select_k(&[4.0, 4.0, 4.0], 2..=6).unwrap();
        assert_eq!(k, 1);
        assert_eq!(r.centroids, vec![4.0]);
    }

    #[test]
    fn boundaries_midpoints() {
        assert_eq!(boundaries(&[0.5, 10.5]).unwrap(), vec![5.5]);
        assert_eq!(boundaries(&[0.0, 1.0, 2.0]).unwrap(), vec![0.5, 1.5]);
        assert_eq!(boundaries(&[-1.0, 1.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            boundaries(&[1.0]),
            Err(DiscretizeError::TooFewCentroids(1))
        ));
    }

    #[test]
    fn terciles_on_one_to_nine() {
        let values: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let bins = tercile_bins(&values).unwrap();
        assert_eq!(bins.len(), 3);
        assert_eq!(bins[0], Interval::new(f64::NEG_INFINITY, 4.0));
        assert_eq!(bins[1], Interval::new(4.0, 7.0));
        assert_eq!(bins[2], Interval::new(7.0, f64::INFINITY));
        for bin in &bins {
            assert_eq!(values.iter().filter(|v| bin.contains(**v)).count(), 3);
        }
    }

    #[test]
    fn terciles_all_equal_collapse_to_full() {
        let bins = tercile_bins(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(bins, vec![Interval::full()]);
    }

    #[test]
    fn terciles_two_levels_collapse_to_two_bins() {
        // Q1 lands on the minimum, which would leave an empty leading bin
        let bins = tercile_bins(&[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0], Interval::new(f64::NEG_INFINITY, 2.0));
        assert_eq!(bins[1], Interval::new(2.0, f64::INFINITY));
    }

    #[test]
    fn merge_tercile_bins_gives_paper_pair() {
        let base = vec![
            Interval::new(f64::NEG_INFINITY, 4.0),
            Interval::new(4.0, 7.0),
            Interval::new(7.0, f64::INFINITY),
        ];
        let merged = merge_adjacent(&base);
        assert_eq!(
            merged,
            vec![
                Interval::new(f64::NEG_INFINITY, 7.0),
                Interval::new(4.0, f64::INFINITY),
            ]
        );
    }

    #[test]
    fn merge_counts_follow_run_law() {
        for b in 1..=6usize {
            let bounds: Vec<f64> = (1..b).map(|i| i as f64).collect();
            let base = bins_from_boundaries(&bounds);
            assert_eq!(base.len(), b);
            let expected = if b >= 2 { b * (b - 1) / 2 - 1 } else { 0 };
            assert_eq!(merge_adjacent(&base).len(), expected, "B = {b}");
        }
    }

    #[test]
    fn merge_two_bins_is_empty() {
        let base = bins_from_boundaries(&[0.5]);
        assert!(merge_adjacent(&base).is_empty());
    }

    #[test]
    fn discretize_bimodal_kmeans() {
        let values = [vec![0.0; 5], vec![1.0; 5]].concat();
        let bs = discretize_feature(0, &values, Strategy::KMeans, 2..=6).unwrap();
        assert_eq!(bs.k_selected, Some(2));
        assert_eq!(bs.base.len(), 2);
        assert_eq!(bs.base[0].upper, 0.5);
        assert!(bs.merged.is_empty());
    }

    #[test]
    fn discretize_tercile_five_bins() {
        let values: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let bs = discretize_feature(0, &values, Strategy::Tercile, 2..=6).unwrap();
        assert_eq!(bs.base.len(), 3);
        assert_eq!(bs.merged.len(), 2);
        assert_eq!(bs.n_bins(), 5);
    }

    #[test]
    fn discretize_constant_column() {
        for strategy in [Strategy::KMeans, Strategy::Tercile] {
            let bs = discretize_feature(0, &[0.0; 8], strategy, 2..=6).unwrap();
            assert_eq!(bs.base, vec![Interval::full()]);
            assert!(bs.merged.is_empty());
        }
    }

    #[test]
    fn every_value_in_exactly_one_base_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for strategy in [Strategy::KMeans, Strategy::Tercile] {
            for _ in 0..40 {
                let n = rng.gen_range(1..=60);
                let values: Vec<f64> =
                    (0..n).map(|_| (rng.gen_range(0..25) as f64) / 24.0).collect();
                let bs = discretize_feature(0, &values, strategy, 2..=6).unwrap();
                for &v in &values {
                    let hits = bs.base.iter().filter(|b| b.contains(v)).count();
                    assert_eq!(hits, 1, "value {v} hit {hits} base bins ({strategy:?})");
                }
            }
        }
    }

    #[test]
    fn interval_json_uses_null_for_infinite_bounds() {
        let json = serde_json::to_string(&Interval::new(f64::NEG_INFINITY, 0.5)).unwrap();
        assert_eq!(json, r#"{"lower":null,"upper":0.5}"#);
        let back: Interval = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Interval::new(f64::NEG_INFINITY, 0.5));
    }
}
