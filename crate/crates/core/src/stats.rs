//! Small statistical helpers: compensated sums, confidence intervals and a
//! bootstrap over summed resampling units.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::aux_rng;

pub const Z95: f64 = 1.959_963_984_540_054;
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn excludes_zero(&self) -> bool {
        !self.contains(0.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    fn normal(mean: f64, se: f64, z: f64) -> Self {
        Self::new(mean - z * se, mean + z * se)
    }
}

/// Mean with normal-approximation 95% and 99% intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci95: Interval,
    pub ci99: Interval,
    pub n: usize,
}

pub fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n.max(1) as f64;
    let var = if n > 1 {
        xs.iter()
            .map(|x| (x - mean).powi(2))
            .collect::<KahanSum>()
            .value()
            / (n - 1) as f64
    } else {
        0.0
    };
    let std_err = (var / n.max(1) as f64).sqrt();
    MeanEstimate {
        mean,
        std_err,
        ci95: Interval::normal(mean, std_err, Z95),
        ci99: Interval::normal(mean, std_err, Z99),
        n,
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: usize, trials: usize, z: f64) -> Interval {
    if trials == 0 {
        return Interval::new(0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (phat + z * z / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    Interval::new(lo, hi)
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Percentile intervals from bootstrap replicates.
pub fn percentile_intervals(mut reps: Vec<f64>) -> (Interval, Interval) {
    reps.sort_by(|a, b| a.total_cmp(b));
    (
        Interval::new(quantile(&reps, 0.025), quantile(&reps, 0.975)),
        Interval::new(quantile(&reps, 0.005), quantile(&reps, 0.995)),
    )
}

/// A statistic of componentwise unit totals.
pub type Statistic<const K: usize> = dyn Fn(&[f64; K]) -> f64 + Sync;

/// Bootstraps statistics of summed units.
///
/// Each resample draws `units.len()` units with replacement, sums them
/// componentwise, and applies every function in `stats` to the totals.
/// Returns one replicate vector per statistic. Resample `r` uses its own
/// generator derived from `(seed, r)`, so results do not depend on thread count.
pub fn bootstrap_sums<const K: usize>(
    units: &[[f64; K]],
    resamples: usize,
    seed: u64,
    stats: &[&Statistic<K>],
) -> Vec<Vec<f64>> {
    assert!(!units.is_empty(), "bootstrap needs at least one unit");
    let per_resample: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = aux_rng(seed, r as u64);
            let mut totals = [0.0f64; K];
            for _ in 0..units.len() {
                let u = &units[rng.random_range(0..units.len())];
                for (t, v) in totals.iter_mut().zip(u) {
                    *t += v;
                }
            }
            stats.iter().map(|f| f(&totals)).collect()
        })
        .collect();
    (0..stats.len())
        .map(|s| per_resample.iter().map(|row| row[s]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive() {
        let xs = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000));
        let s: KahanSum = xs.collect();
        assert!((s.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.125), 1.5);
        assert_eq!(quantile(&v, 1.0), 5.0);
    }

    #[test]
    fn wilson_contains_phat() {
        for (s, n) in [(0, 10), (3, 10), (10, 10), (500, 1000)] {
            let ci = wilson(s, n, Z95);
            assert!(ci.contains(s as f64 / n as f64));
        }
        assert!(wilson(0, 100, Z95).lo == 0.0);
    }

    #[test]
    fn bootstrap_ratio_is_deterministic_and_sane() {
        let units: Vec<[f64; 2]> = (0..200).map(|i| [1.0, 2.0 + (i % 5) as f64]).collect();
        let ratio = |t: &[f64; 2]| t[0] / t[1];
        let a = bootstrap_sums(&units, 500, 1, &[&ratio]);
        let b = bootstrap_sums(&units, 500, 1, &[&ratio]);
        assert_eq!(a, b);
        let (ci95, ci99) = percentile_intervals(a[0].clone());
        let point = 200.0 / units.iter().map(|u| u[1]).sum::<f64>();
        assert!(ci95.contains(point));
        assert!(ci99.width() >= ci95.width());
    }

    #[test]
    fn mean_estimate_basic() {
        let m = mean_estimate(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std_err - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(m.ci99.width() > m.ci95.width());
    }
}
