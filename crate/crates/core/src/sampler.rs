//! Collocation point generation.
//!
//! Points are drawn by Latin hypercube sampling. The adaptive strategies first
//! turn per-slice losses into a distribution over time slices, round it to
//! integer counts that sum to the fixed budget, and then draw an LHS set inside
//! every slice.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::causal::SubdomainPartition;
use crate::math;
use crate::{Error, Result};

/// Axis-aligned box `[t_lo, t_hi] x [x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Rect {
    pub fn new(t: (f64, f64), x: (f64, f64)) -> Result<Self> {
        let r = Self {
            t_lo: t.0,
            t_hi: t.1,
            x_lo: x.0,
            x_hi: x.1,
        };
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !(ok(r.t_lo, r.t_hi) && ok(r.x_lo, r.x_hi)) {
            return Err(Error::InvalidArgument("degenerate sampling rectangle".into()));
        }
        Ok(r)
    }

    pub fn contains(&self, (t, x): (f64, f64)) -> bool {
        self.t_lo <= t && t <= self.t_hi && self.x_lo <= x && x <= self.x_hi
    }
}

/// `n` LHS points: one per stratum in each dimension, strata paired by
/// independent random permutations.
pub fn lhs_sample<R: Rng + ?Sized>(n: usize, rect: &Rect, rng: &mut R) -> Vec<(f64, f64)> {
    let t = lhs_axis(n, rect.t_lo, rect.t_hi, rng);
    let x = lhs_axis(n, rect.x_lo, rect.x_hi, rng);
    t.into_iter().zip(x).collect()
}

fn lhs_axis<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    let width = hi - lo;
    strata
        .into_iter()
        .map(|k| {
            let u: f64 = rng.random();
            (lo + (k as f64 + u) / n as f64 * width).min(hi)
        })
        .collect()
}

/// Sampling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    /// One LHS draw before training.
    Fixed,
    /// A fresh uniform LHS draw every interval.
    Dynamic,
    /// Slice counts proportional to slice losses.
    Adaptive,
    /// Slice counts proportional to causal weight times slice loss.
    AdaptiveCausal,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Fixed,
        SamplerKind::Dynamic,
        SamplerKind::Adaptive,
        SamplerKind::AdaptiveCausal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::Fixed => "fixed",
            SamplerKind::Dynamic => "dynamic",
            SamplerKind::Adaptive => "adaptive",
            SamplerKind::AdaptiveCausal => "adaptive_causal",
        }
    }

    /// Whether the set is redrawn before step `iteration`.
    pub fn resamples_at(&self, iteration: usize, interval: usize) -> bool {
        !matches!(self, SamplerKind::Fixed) && interval > 0 && iteration > 0 && iteration % interval == 0
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(SamplerKind::Fixed),
            "dynamic" => Ok(SamplerKind::Dynamic),
            "adaptive" => Ok(SamplerKind::Adaptive),
            "adaptive_causal" | "acsm" => Ok(SamplerKind::AdaptiveCausal),
            other => Err(Error::InvalidArgument(alloc::format!("unknown sampler `{other}`"))),
        }
    }
}

/// Normalized slice distribution; `degenerate` marks the uniform fallback
/// used when every input was zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioOutcome {
    pub ratios: Vec<f64>,
    pub degenerate: bool,
}

fn normalize(products: Vec<f64>) -> RatioOutcome {
    let total: f64 = products.iter().sum();
    if total > 0.0 && total.is_finite() {
        RatioOutcome {
            ratios: products.into_iter().map(|p| p / total).collect(),
            degenerate: false,
        }
    } else {
        let n = products.len();
        RatioOutcome {
            ratios: vec![1.0 / n as f64; n],
            degenerate: true,
        }
    }
}

fn check_losses(losses: &[f64]) -> Result<()> {
    if losses.is_empty() {
        return Err(Error::Empty("slice losses"));
    }
    if losses.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument("slice losses must be finite and non-negative".into()));
    }
    Ok(())
}

/// `L_i / sum_k L_k`.
pub fn adaptive_ratio(losses: &[f64]) -> Result<RatioOutcome> {
    check_losses(losses)?;
    Ok(normalize(losses.to_vec()))
}

/// `w_i L_i / sum_k w_k L_k`.
pub fn causal_ratio(losses: &[f64], weights: &[f64]) -> Result<RatioOutcome> {
    check_losses(losses)?;
    if weights.len() != losses.len() {
        return Err(Error::DimensionMismatch {
            context: "causal ratio weights",
            expected: losses.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("causal weights must be finite and non-negative".into()));
    }
    Ok(normalize(losses.iter().zip(weights).map(|(l, w)| w * l).collect()))
}

/// Largest-remainder rounding of `total * ratios`: floor every share, then
/// hand the leftover points one by one to the largest fractional parts, ties
/// going to the earlier slice. Zero-ratio slices never receive points.
pub fn allocate_counts(total: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    if ratios.is_empty() {
        return Err(Error::Empty("ratios"));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidArgument("ratios must be finite and non-negative".into()));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(alloc::format!("ratios sum to {sum}, not 1")));
    }
    let shares: Vec<f64> = ratios.iter().map(|r| total as f64 * r).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| math::floor(*s) as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned > total {
        // only reachable when the ratios overshoot 1 by rounding
        let mut excess = assigned - total;
        for i in (0..counts.len()).rev() {
            let take = excess.min(counts[i]);
            counts[i] -= take;
            excess -= take;
        }
        return Ok(counts);
    }
    let mut order: Vec<usize> = (0..ratios.len()).filter(|&i| ratios[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - counts[a] as f64;
        let rb = shares[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let leftover = total - assigned;
    for k in 0..leftover {
        counts[order[k % order.len()]] += 1;
    }
    Ok(counts)
}

/// Residual points with their slice tags.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub points: Vec<(f64, f64)>,
    pub slice_index: Vec<usize>,
    pub counts: Vec<usize>,
    pub seed_lineage: u64,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean sampling time of the set.
    pub fn time_centroid(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| p.0).sum::<f64>() / self.points.len() as f64
    }

    /// Order-sensitive FNV-1a hash over the point coordinates.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &(t, x) in &self.points {
            for bits in [t.to_bits(), x.to_bits()] {
                for byte in bits.to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Checks `sum counts = len`, slice tags and the bounds invariant.
    pub fn validate(&self, partition: &SubdomainPartition, x_bounds: (f64, f64)) -> Result<()> {
        if self.counts.len() != partition.len() || self.counts.iter().sum::<usize>() != self.points.len() {
            return Err(Error::InvalidArgument("collocation counts do not match the point set".into()));
        }
        for (&(t, x), &s) in self.points.iter().zip(&self.slice_index) {
            let (lo, hi) = partition.interval(s);
            if !(lo <= t && t <= hi && x_bounds.0 <= x && x <= x_bounds.1) {
                return Err(Error::InvalidArgument("collocation point outside its slice".into()));
            }
        }
        Ok(())
    }
}

/// A whole-domain LHS draw of `total` points, tagged by slice.
pub fn uniform_set(total: usize, partition: &SubdomainPartition, x_bounds: (f64, f64), seed: u64) -> Result<CollocationSet> {
    let rect = Rect::new((0.0, partition.horizon()), x_bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = lhs_sample(total, &rect, &mut rng);
    let slice_index: Vec<usize> = points.iter().map(|p| partition.slice_of(p.0)).collect();
    let mut counts = vec![0; partition.len()];
    for &s in &slice_index {
        counts[s] += 1;
    }
    Ok(CollocationSet {
        points,
        slice_index,
        counts,
        seed_lineage: seed,
    })
}

/// Per-slice LHS draws with the given counts. Slice `i` uses stream `i` of
/// the ChaCha generator seeded with `seed`.
pub fn sample_with_counts(
    counts: &[usize],
    partition: &SubdomainPartition,
    x_bounds: (f64, f64),
    seed: u64,
) -> Result<CollocationSet> {
    if counts.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            context: "slice counts",
            expected: partition.len(),
            found: counts.len(),
        });
    }
    let total: usize = counts.iter().sum();
    let mut points = Vec::with_capacity(total);
    let mut slice_index = Vec::with_capacity(total);
    for (i, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let rect = Rect::new(partition.interval(i), x_bounds)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        points.extend(lhs_sample(n, &rect, &mut rng));
        slice_index.extend(core::iter::repeat_n(i, n));
    }
    Ok(CollocationSet {
        points,
        slice_index,
        counts: counts.to_vec(),
        seed_lineage: seed,
    })
}

/// Causal ratio, count allocation and per-slice LHS in one go.
pub fn resample(
    total: usize,
    partition: &SubdomainPartition,
    losses: &[f64],
    weights: &[f64],
    x_bounds: (f64, f64),
    seed: u64,
) -> Result<(CollocationSet, RatioOutcome)> {
    let ratios = causal_ratio(losses, weights)?;
    let counts = allocate_counts(total, &ratios.ratios)?;
    Ok((sample_with_counts(&counts, partition, x_bounds, seed)?, ratios))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::{causal_weights, make_partition};
    use proptest::prelude::*;

    #[test]
    fn lhs_one_point_per_stratum() {
        let rect = Rect::new((0.0, 1.0), (0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = lhs_sample(4, &rect, &mut rng);
        for axis in 0..2 {
            let mut v: Vec<f64> = pts.iter().map(|p| if axis == 0 { p.0 } else { p.1 }).collect();
            v.sort_by(f64::total_cmp);
            for (k, val) in v.iter().enumerate() {
                assert!(*val >= k as f64 * 0.25 && *val <= (k + 1) as f64 * 0.25);
            }
        }
        assert!(lhs_sample(0, &rect, &mut rng).is_empty());
    }

    #[test]
    fn lhs_deterministic_per_seed() {
        let rect = Rect::new((0.0, 1.0), (-1.0, 1.0)).unwrap();
        let a = lhs_sample(1000, &rect, &mut ChaCha8Rng::seed_from_u64(9));
        let b = lhs_sample(1000, &rect, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|p| rect.contains(*p)));
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        assert!(Rect::new((0.0, 0.0), (0.0, 1.0)).is_err());
        assert!(Rect::new((0.0, 1.0), (1.0, -1.0)).is_err());
    }

    #[test]
    fn adaptive_ratio_examples() {
        assert_eq!(adaptive_ratio(&[1.0, 3.0]).unwrap().ratios, vec![0.25, 0.75]);
        assert_eq!(adaptive_ratio(&[2.0; 4]).unwrap().ratios, vec![0.25; 4]);
        let zero = adaptive_ratio(&[0.0; 5]).unwrap();
        assert!(zero.degenerate);
        assert_eq!(zero.ratios, vec![0.2; 5]);
        assert!(adaptive_ratio(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn causal_ratio_examples() {
        let losses = [0.5, 0.3, 0.2];
        let w = causal_weights(&losses, 1.0).unwrap();
        let r = causal_ratio(&losses, &w.weights).unwrap().ratios;
        let expected = [0.64781, 0.23575, 0.11644];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
        assert_eq!(causal_ratio(&losses, &[1.0; 3]).unwrap(), adaptive_ratio(&losses).unwrap());
        let r = causal_ratio(&[0.4, 0.9, 0.2], &[1.0, 0.0, 0.3]).unwrap().ratios;
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_counts(10, &[0.25, 0.75]).unwrap(), vec![3, 7]);
        assert_eq!(allocate_counts(17, &[1.0, 0.0, 0.0]).unwrap(), vec![17, 0, 0]);
        assert!(allocate_counts(10, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn resample_all_in_first_slice() {
        let p = make_partition(1.0, 5).unwrap();
        let (set, _) = resample(50, &p, &[0.3, 0.2, 0.2, 0.1, 0.1], &[1.0, 0.0, 0.0, 0.0, 0.0], (-1.0, 1.0), 1).unwrap();
        assert_eq!(set.counts, vec![50, 0, 0, 0, 0]);
        assert!(set.points.iter().all(|p| p.0 <= 0.2));
    }

    #[test]
    fn resample_equal_losses_five_per_slice() {
        let p = make_partition(1.0, 20).unwrap();
        let (set, _) = resample(100, &p, &[0.7; 20], &[1.0; 20], (-1.0, 1.0), 4).unwrap();
        assert_eq!(set.counts, vec![5; 20]);
        set.validate(&p, (-1.0, 1.0)).unwrap();
        for i in 0..20 {
            let (lo, hi) = p.interval(i);
            let mut ts: Vec<f64> = set.points.iter().zip(&set.slice_index).filter(|(_, &s)| s == i).map(|(q, _)| q.0).collect();
            ts.sort_by(f64::total_cmp);
            let w = (hi - lo) / 5.0;
            for (k, t) in ts.iter().enumerate() {
                assert!(*t >= lo + k as f64 * w - 1e-12 && *t <= lo + (k + 1) as f64 * w + 1e-12);
            }
        }
        let (again, _) = resample(100, &p, &[0.7; 20], &[1.0; 20], (-1.0, 1.0), 4).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn sampler_kind_round_trip_and_schedule() {
        for k in SamplerKind::ALL {
            assert_eq!(k.as_str().parse::<SamplerKind>().unwrap(), k);
        }
        assert!(!SamplerKind::Fixed.resamples_at(1000, 1000));
        assert!(SamplerKind::Dynamic.resamples_at(2000, 1000));
        assert!(!SamplerKind::Dynamic.resamples_at(0, 1000));
        assert!(!SamplerKind::AdaptiveCausal.resamples_at(1500, 1000));
    }

    #[test]
    fn uniform_set_tags_slices() {
        let p = make_partition(0.8, 10).unwrap();
        let set = uniform_set(300, &p, (-1.0, 1.0), 2).unwrap();
        set.validate(&p, (-1.0, 1.0)).unwrap();
        assert_eq!(set.counts, vec![30; 10]);
    }

    fn ratios_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], 1..30)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn allocation_sums_to_budget(total in 0usize..5000, raw in ratios_strategy()) {
            let r = adaptive_ratio(&raw).unwrap().ratios;
            let counts = allocate_counts(total, &r).unwrap();
            prop_assert_eq!(counts.iter().sum::<usize>(), total);
            for (c, q) in counts.iter().zip(&r) {
                if *q == 0.0 {
                    prop_assert_eq!(*c, 0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ratios_sum_to_one(raw in proptest::collection::vec(0.0f64..10.0, 1..40), w in proptest::collection::vec(0.0f64..=1.0, 40)) {
            let a = adaptive_ratio(&raw).unwrap().ratios;
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let c = causal_ratio(&raw, &w[..raw.len()]).unwrap().ratios;
            prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn unit_weights_reduce_to_adaptive(raw in proptest::collection::vec(0.0f64..10.0, 1..40)) {
            let ones = vec![1.0; raw.len()];
            prop_assert_eq!(causal_ratio(&raw, &ones).unwrap(), adaptive_ratio(&raw).unwrap());
        }

        #[test]
        fn adaptive_ratio_scale_invariant(raw in proptest::collection::vec(0.01f64..10.0, 1..20), c in 0.1f64..100.0) {
            let a = adaptive_ratio(&raw).unwrap().ratios;
            let scaled: Vec<f64> = raw.iter().map(|v| v * c).collect();
            let b = adaptive_ratio(&scaled).unwrap().ratios;
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300) + 1e-15);
            }
        }

        #[test]
        fn resampled_points_respect_bounds(seed in 0u64..500, n in 1usize..400, raw in proptest::collection::vec(0.0f64..1.0, 8)) {
            let p = make_partition(0.8, 8).unwrap();
            let w = causal_weights(&raw, 1.0).unwrap();
            let (set, _) = resample(n, &p, &raw, &w.weights, (-1.0, 1.0), seed).unwrap();
            prop_assert_eq!(set.len(), n);
            prop_assert!(set.validate(&p, (-1.0, 1.0)).is_ok());
        }
    }
}
