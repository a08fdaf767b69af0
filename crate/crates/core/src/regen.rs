//! Regeneration levels, speed estimation, and the strict-monotonicity witness.
//!
//! A level `x >= 0` is a regeneration level of a right-transient walk if the
//! walk never goes below `x` after first reaching it. At a finite horizon this
//! is censored: `x` is accepted only if the path stays at or above `x` for the
//! rest of the horizon and climbs to `x + guard` before the horizon ends.
//!
//! Blocks between consecutive regeneration levels are i.i.d., so the speed is
//! the ratio of mean block displacement to mean block duration. For a coupled
//! pair `L ⪯ R`, every regeneration level of `L` is one of `R`, and `R`
//! crosses each `L`-block no slower than `L`; estimating both speeds on
//! `L`'s blocks therefore orders the two estimates on every run.

use rayon::prelude::*;
use serde::Serialize;

use crate::arrows::{Property, PropertyReport, WalkPath};
use crate::coupling::CouplingKernel;
use crate::env::CookieEnvironment;
use crate::error::{Error, Result};
use crate::rng::{CellStream, SeedKey};
use crate::stats::{
    bootstrap_sums, mean_estimate, percentile_intervals, wilson, Interval, MeanEstimate, Z95, Z99,
};
use crate::walk::{simulate_coupled_paths, simulate_erw, simulate_erw_endpoint};

pub const DEFAULT_GUARD: usize = 50;
pub const DEFAULT_RESAMPLES: usize = 2000;
pub const SENSITIVITY_GUARDS: [usize; 3] = [10, 50, 200];
/// Fewer interior blocks than this and no estimate is produced.
pub const MIN_BLOCKS: usize = 10;

/// Consecutive blocks summed into one bootstrap unit.
const BATCH: usize = 32;
/// Units beyond this are merged pairwise (within a replica) before resampling.
const MAX_UNITS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub displacement: i64,
    pub duration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CensorMeta {
    pub horizon: usize,
    pub guard: usize,
    /// Path segments before the first and after the last confirmed level.
    pub discarded_edge_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegenerationReport {
    pub levels: Vec<i64>,
    /// First hitting time of each level.
    pub hit_times: Vec<usize>,
    pub zero_is_regen: bool,
    pub censor: CensorMeta,
    pub blocks: Vec<Block>,
}

impl RegenerationReport {
    pub fn first_positive_level(&self) -> Option<(i64, usize)> {
        self.levels
            .iter()
            .zip(&self.hit_times)
            .find(|(&x, _)| x > 0)
            .map(|(&x, &t)| (x, t))
    }

    pub fn contains(&self, level: i64) -> bool {
        self.levels.binary_search(&level).is_ok()
    }
}

fn suffix_min(positions: &[i64]) -> Vec<i64> {
    let mut out = positions.to_vec();
    for t in (0..out.len().saturating_sub(1)).rev() {
        out[t] = out[t].min(out[t + 1]);
    }
    out
}

/// First hitting times of levels `0..=max`.
fn first_hits(path: &WalkPath) -> Vec<usize> {
    let mut hits = vec![0];
    hits.extend(path.first_hits_positive());
    hits
}

/// Censored regeneration levels of `path`.
pub fn find_regenerations(path: &WalkPath, guard: usize) -> RegenerationReport {
    assert!(guard >= 1, "guard must be positive");
    let hits = first_hits(path);
    let smin = suffix_min(&path.positions);
    let top = hits.len() as i64 - 1;
    let mut levels = Vec::new();
    let mut hit_times = Vec::new();
    for x in 0..=(top - guard as i64) {
        let t = hits[x as usize];
        if smin[t] >= x {
            levels.push(x);
            hit_times.push(t);
        }
    }
    let blocks: Vec<Block> = levels
        .windows(2)
        .zip(hit_times.windows(2))
        .map(|(l, t)| Block {
            displacement: l[1] - l[0],
            duration: t[1] - t[0],
        })
        .collect();
    let discarded_edge_blocks = match levels.first() {
        None => 0,
        Some(&first) => 1 + (first != 0) as usize,
    };
    RegenerationReport {
        zero_is_regen: levels.first() == Some(&0),
        levels,
        hit_times,
        censor: CensorMeta {
            horizon: path.horizon(),
            guard,
            discarded_edge_blocks,
        },
        blocks,
    }
}

/// `L`'s regeneration levels confirmed for `R` as well.
#[derive(Debug, Clone, PartialEq)]
pub struct MutualLevels {
    /// `(level, T_L(level), T_R(level))`.
    pub levels: Vec<(i64, usize, usize)>,
    pub l_report: RegenerationReport,
    pub report: PropertyReport,
}

impl MutualLevels {
    /// `(displacement, duration under L, duration under R)` per block.
    pub fn blocks(&self) -> impl Iterator<Item = (i64, usize, usize)> + '_ {
        self.levels
            .windows(2)
            .map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1, w[1].2 - w[0].2))
    }

    pub fn contains(&self, level: i64) -> bool {
        self.levels.iter().any(|&(x, _, _)| x == level)
    }
}

/// Confirms each of `L`'s censored levels for `R` and checks block durations.
///
/// `R` is tested on the same number of steps `L` had left after reaching the
/// level: from `T_R(x)` for `n - T_L(x)` steps it must stay at or above `x`
/// and reach `x + guard`. With `L ⪯ R` this follows path-wise from the
/// running-extrema ordering of the walks restarted at `x`, so any failure is
/// a genuine violation rather than a censoring artefact.
pub fn mutual_levels(l: &WalkPath, r: &WalkPath, guard: usize) -> MutualLevels {
    let l_report = find_regenerations(l, guard);
    let n = l.horizon();
    let r_hits = first_hits(r);
    let r_smin = suffix_min(&r.positions);
    let mut report = PropertyReport::default();
    let mut levels = Vec::with_capacity(l_report.levels.len());

    for (&x, &tl) in l_report.levels.iter().zip(&l_report.hit_times) {
        let Some(&tr) = r_hits.get(x as usize) else {
            report.violate(
                Property::RegenerationInclusion,
                format!("level {x}: L regenerates, R never reaches it"),
            );
            continue;
        };
        let window_end = (tr + (n - tl)).min(r.horizon());
        let stays = r_smin[tr] >= x || r.positions[tr..=window_end].iter().all(|&y| y >= x);
        let climbs = r_hits
            .get(x as usize + guard)
            .is_some_and(|&t| t <= window_end);
        if stays && climbs {
            levels.push((x, tl, tr));
        } else {
            report.violate(
                Property::RegenerationInclusion,
                format!("level {x}: L regenerates (T_L = {tl}), R does not (T_R = {tr})"),
            );
        }
    }
    report.tally(
        Property::RegenerationInclusion,
        l_report.levels.len() as u64,
    );

    report.tally(Property::IndicatorOrder, 1);
    if l_report.zero_is_regen && levels.first().map(|l| l.0) != Some(0) {
        report.violate(
            Property::IndicatorOrder,
            "0 regenerates for L but not for R".into(),
        );
    }

    let mut blocks = 0u64;
    for w in levels.windows(2) {
        let (dl, dr) = (w[1].1 - w[0].1, w[1].2 as i64 - w[0].2 as i64);
        blocks += 1;
        if dr > dl as i64 {
            report.violate(
                Property::BlockDurationOrder,
                format!(
                    "block [{}, {}]: R takes {dr} steps, L takes {dl}",
                    w[0].0, w[1].0
                ),
            );
        }
    }
    report.tally(Property::BlockDurationOrder, blocks);

    MutualLevels {
        levels,
        l_report,
        report,
    }
}

/// Regeneration-set inclusion, block-duration order and indicator order for a sample.
pub fn mutual_regeneration_check(
    sample: &crate::walk::CoupledSample,
    guard: usize,
) -> PropertyReport {
    mutual_levels(&sample.l_path, &sample.r_path, guard).report
}

/// Monte Carlo run size shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunParams {
    pub seed: u64,
    pub replicas: usize,
    pub horizon: usize,
    pub guard: usize,
    pub resamples: usize,
}

impl RunParams {
    pub fn new(seed: u64, replicas: usize, horizon: usize) -> Self {
        Self {
            seed,
            replicas,
            horizon,
            guard: DEFAULT_GUARD,
            resamples: DEFAULT_RESAMPLES,
        }
    }

    pub fn with_guard(mut self, guard: usize) -> Self {
        self.guard = guard;
        self
    }

    pub fn with_resamples(mut self, resamples: usize) -> Self {
        self.resamples = resamples;
        self
    }

    fn key(&self, replica: usize) -> SeedKey {
        SeedKey::new(self.seed, replica as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RegenerationRatio,
    Naive,
    PairedDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub value: f64,
    pub ci95: Interval,
    pub ci99: Interval,
    pub method: Method,
    pub block_count: usize,
    pub replica_count: usize,
    /// The environment is not known to have positive speed.
    pub zero_speed_caveat: bool,
}

/// Sums consecutive entries in groups of `size`.
fn batch<const K: usize>(items: impl Iterator<Item = [f64; K]>, size: usize) -> Vec<[f64; K]> {
    let mut out = Vec::new();
    let mut acc = [0.0; K];
    let mut filled = 0;
    for item in items {
        for (a, v) in acc.iter_mut().zip(item) {
            *a += v;
        }
        filled += 1;
        if filled == size {
            out.push(acc);
            acc = [0.0; K];
            filled = 0;
        }
    }
    if filled > 0 {
        out.push(acc);
    }
    out
}

/// Flattens per-replica batches, merging within replicas until at most `MAX_UNITS` remain.
fn pool_units<const K: usize>(per_replica: Vec<Vec<[f64; K]>>) -> Vec<[f64; K]> {
    let total: usize = per_replica.iter().map(Vec::len).sum();
    let factor = total.div_ceil(MAX_UNITS).max(1);
    per_replica
        .into_iter()
        .flat_map(|units| batch(units.into_iter(), factor))
        .collect()
}

fn totals<const K: usize>(units: &[[f64; K]]) -> [f64; K] {
    let mut t = [0.0; K];
    for u in units {
        for (a, v) in t.iter_mut().zip(u) {
            *a += v;
        }
    }
    t
}

fn ratio_estimate(
    units: &[[f64; 2]],
    blocks: usize,
    params: &RunParams,
    caveat: bool,
) -> Result<SpeedEstimate> {
    if blocks < MIN_BLOCKS {
        return Err(Error::InsufficientRegenerations {
            blocks,
            needed: MIN_BLOCKS,
        });
    }
    let t = totals(units);
    let ratio = |t: &[f64; 2]| t[0] / t[1];
    let reps = bootstrap_sums(units, params.resamples, params.seed, &[&ratio]);
    let (ci95, ci99) = percentile_intervals(reps.into_iter().next().expect("one statistic"));
    Ok(SpeedEstimate {
        value: ratio(&t),
        ci95,
        ci99,
        method: Method::RegenerationRatio,
        block_count: blocks,
        replica_count: params.replicas,
        zero_speed_caveat: caveat,
    })
}

/// Pooled regeneration-ratio speed estimate with a bootstrap over blocks.
pub fn speed_regeneration(env: &CookieEnvironment, params: &RunParams) -> Result<SpeedEstimate> {
    guard_sensitivity(env, params, &[params.guard])
        .pop()
        .expect("one guard")
        .1
}

/// The regeneration estimator at several guards on one set of simulated paths.
pub fn guard_sensitivity(
    env: &CookieEnvironment,
    params: &RunParams,
    guards: &[usize],
) -> Vec<(usize, Result<SpeedEstimate>)> {
    let caveat = !env.classify().positive_speed();
    // per replica, per guard: (batched units, block count)
    type PerGuard = Vec<(Vec<[f64; 2]>, usize)>;
    let per_replica: Result<Vec<PerGuard>> = (0..params.replicas)
        .into_par_iter()
        .map(|r| {
            let path = simulate_erw(env, params.key(r), params.horizon)?;
            Ok(guards
                .iter()
                .map(|&g| {
                    let rep = find_regenerations(&path, g);
                    let units = batch(
                        rep.blocks
                            .iter()
                            .map(|b| [b.displacement as f64, b.duration as f64]),
                        BATCH,
                    );
                    (units, rep.blocks.len())
                })
                .collect())
        })
        .collect();
    let per_replica = match per_replica {
        Ok(v) => v,
        Err(e) => return guards.iter().map(|&g| (g, Err(e.clone()))).collect(),
    };
    guards
        .iter()
        .enumerate()
        .map(|(gi, &g)| {
            let blocks: usize = per_replica.iter().map(|r| r[gi].1).sum();
            let units = pool_units(per_replica.iter().map(|r| r[gi].0.clone()).collect());
            let p = params.with_guard(g);
            (g, ratio_estimate(&units, blocks, &p, caveat))
        })
        .collect()
}

/// Speeds of both environments of a kernel, estimated on `L`'s mutual blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledSpeeds {
    pub p: SpeedEstimate,
    pub q: SpeedEstimate,
    /// `v_q - v_p` with a paired bootstrap interval.
    pub diff: SpeedEstimate,
    /// Blocks on which `R` was strictly faster.
    pub strict_blocks: usize,
    pub checks: PropertyReport,
}

pub fn coupled_speed_pair(kernel: &CouplingKernel, params: &RunParams) -> Result<CoupledSpeeds> {
    let caveat = !kernel.p_env().classify().positive_speed();
    let per_replica: Vec<(Vec<[f64; 3]>, usize, usize, PropertyReport)> = (0..params.replicas)
        .into_par_iter()
        .map(|r| {
            let (l, rp) = simulate_coupled_paths(kernel, params.key(r), params.horizon)?;
            let mutual = mutual_levels(&l, &rp, params.guard);
            if let Some(v) = mutual.report.violations.first() {
                return Err(Error::CouplingViolation {
                    replica: r as u64,
                    what: format!("{}: {}", v.property.name(), v.detail),
                });
            }
            let mut strict = 0;
            let mut n = 0;
            let units = batch(
                mutual.blocks().map(|(d, tl, tr)| {
                    n += 1;
                    strict += (tr < tl) as usize;
                    [d as f64, tl as f64, tr as f64]
                }),
                BATCH,
            );
            Ok((units, n, strict, mutual.report))
        })
        .collect::<Result<_>>()?;

    let blocks: usize = per_replica.iter().map(|r| r.1).sum();
    let strict_blocks: usize = per_replica.iter().map(|r| r.2).sum();
    let mut checks = PropertyReport::default();
    let mut units_per_replica = Vec::with_capacity(per_replica.len());
    for (units, _, _, rep) in per_replica {
        checks.merge(rep);
        units_per_replica.push(units);
    }
    if blocks < MIN_BLOCKS {
        return Err(Error::InsufficientRegenerations {
            blocks,
            needed: MIN_BLOCKS,
        });
    }
    let units = pool_units(units_per_replica);
    let t = totals(&units);
    let vp = |t: &[f64; 3]| t[0] / t[1];
    let vq = |t: &[f64; 3]| t[0] / t[2];
    let diff = |t: &[f64; 3]| t[0] / t[2] - t[0] / t[1];
    let (value_p, value_q, value_diff) = (vp(&t), vq(&t), diff(&t));
    assert!(
        value_q >= value_p,
        "paired estimates out of order: v_q = {value_q} < v_p = {value_p}"
    );

    let mut reps = bootstrap_sums(&units, params.resamples, params.seed, &[&vp, &vq, &diff])
        .into_iter()
        .map(percentile_intervals);
    let mut make = |value: f64, method: Method| {
        let (ci95, ci99) = reps.next().expect("three statistics");
        SpeedEstimate {
            value,
            ci95,
            ci99,
            method,
            block_count: blocks,
            replica_count: params.replicas,
            zero_speed_caveat: caveat,
        }
    };
    Ok(CoupledSpeeds {
        p: make(value_p, Method::RegenerationRatio),
        q: make(value_q, Method::RegenerationRatio),
        diff: make(value_diff, Method::PairedDifference),
        strict_blocks,
        checks,
    })
}

/// Mean of `X_n / n` over replicas with a normal interval.
pub fn naive_speed(env: &CookieEnvironment, params: &RunParams) -> Result<SpeedEstimate> {
    let n = params.horizon;
    assert!(n > 0, "horizon must be positive");
    let speeds: Vec<f64> = (0..params.replicas)
        .into_par_iter()
        .map(|r| simulate_erw_endpoint(env, params.key(r), n).map(|x| x as f64 / n as f64))
        .collect::<Result<_>>()?;
    let m = mean_estimate(&speeds);
    Ok(SpeedEstimate {
        value: m.mean,
        ci95: m.ci95,
        ci99: m.ci99,
        method: Method::Naive,
        block_count: 0,
        replica_count: params.replicas,
        zero_speed_caveat: !env.classify().positive_speed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub ci95: Interval,
    pub ci99: Interval,
    pub successes: usize,
    pub trials: usize,
}

impl ProbabilityEstimate {
    pub fn from_counts(successes: usize, trials: usize) -> Self {
        Self {
            value: successes as f64 / trials.max(1) as f64,
            ci95: wilson(successes, trials, Z95),
            ci99: wilson(successes, trials, Z99),
            successes,
            trials,
        }
    }
}

/// Fraction of replicas on which 0 is a (censored) regeneration level.
pub fn regen_probability(
    env: &CookieEnvironment,
    params: &RunParams,
) -> Result<ProbabilityEstimate> {
    let hits: Vec<bool> = (0..params.replicas)
        .into_par_iter()
        .map(|r| {
            let path = simulate_erw(env, params.key(r), params.horizon)?;
            Ok(find_regenerations(&path, params.guard).zero_is_regen)
        })
        .collect::<Result<_>>()?;
    Ok(ProbabilityEstimate::from_counts(
        hits.iter().filter(|&&h| h).count(),
        params.replicas,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegenProbabilityPair {
    pub p: ProbabilityEstimate,
    pub q: ProbabilityEstimate,
    /// Paired `1{0 in D(R)} - 1{0 in D(L)}`.
    pub diff: MeanEstimate,
    /// Replicas with `0` regenerating for `L` but not for `R`.
    pub indicator_violations: Vec<u64>,
    /// Fractions with `X_m > 0` for every `1 <= m <= horizon`.
    pub stays_positive_p: ProbabilityEstimate,
    pub stays_positive_q: ProbabilityEstimate,
}

pub fn regen_probability_coupled(
    kernel: &CouplingKernel,
    params: &RunParams,
) -> Result<RegenProbabilityPair> {
    let rows: Vec<(bool, bool, bool, bool)> = (0..params.replicas)
        .into_par_iter()
        .map(|r| {
            let (l, rp) = simulate_coupled_paths(kernel, params.key(r), params.horizon)?;
            let zl = find_regenerations(&l, params.guard).zero_is_regen;
            let zr = find_regenerations(&rp, params.guard).zero_is_regen;
            let pos = |p: &WalkPath| p.positions[1..].iter().all(|&x| x > 0);
            Ok((zl, zr, pos(&l), pos(&rp)))
        })
        .collect::<Result<_>>()?;
    let count = |f: fn(&(bool, bool, bool, bool)) -> bool| rows.iter().filter(|r| f(r)).count();
    let diffs: Vec<f64> = rows
        .iter()
        .map(|r| r.1 as i32 as f64 - r.0 as i32 as f64)
        .collect();
    let n = params.replicas;
    Ok(RegenProbabilityPair {
        p: ProbabilityEstimate::from_counts(count(|r| r.0), n),
        q: ProbabilityEstimate::from_counts(count(|r| r.1), n),
        diff: mean_estimate(&diffs),
        indicator_violations: rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.0 && !r.1)
            .map(|(i, _)| i as u64)
            .collect(),
        stays_positive_p: ProbabilityEstimate::from_counts(count(|r| r.2), n),
        stays_positive_q: ProbabilityEstimate::from_counts(count(|r| r.3), n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub m0: usize,
    pub replicas: usize,
    pub witnesses: usize,
    pub frequency: ProbabilityEstimate,
    /// Witness replicas on which `L` did not reach its first regeneration
    /// level strictly later than `R`.
    pub conditional_violations: Vec<u64>,
}

/// Cookie conditions of the witness event at sites 0 and 1.
///
/// Site 0: the first `m0 + 1` cookies are right for both walks.
/// Site 1: `L`'s first `m0` cookies are left and `R`'s `m0`-th is right.
pub fn witness_cookies(kernel: &CouplingKernel, m0: usize, seed_key: SeedKey) -> bool {
    let stream = CellStream::new(seed_key);
    let (mut y0, mut z0) = (Vec::new(), Vec::new());
    kernel.extend_site(&stream, 0, m0 + 1, &mut y0, &mut z0);
    if !(y0[..=m0].iter().all(|&b| b) && z0[..=m0].iter().all(|&b| b)) {
        return false;
    }
    let (mut y1, mut z1) = (Vec::new(), Vec::new());
    kernel.extend_site(&stream, 1, m0, &mut y1, &mut z1);
    y1[..m0].iter().all(|&b| !b) && z1[m0 - 1]
}

/// Frequency of the witness event and the hitting-time comparison on it.
///
/// The event: the cookie conditions of [`witness_cookies`], and level 2 a
/// censored regeneration level of `L` confirmed for `R`. On it, `L` needs at
/// least `2 m0 + 2` steps to reach 2 while `R` needs at most `2 m0`.
pub fn witness_event_frequency(
    kernel: &CouplingKernel,
    params: &RunParams,
) -> Result<WitnessReport> {
    let m0 = kernel.m0()?;
    let rows: Vec<Option<bool>> = (0..params.replicas)
        .into_par_iter()
        .map(|r| {
            let key = params.key(r);
            if !witness_cookies(kernel, m0, key) {
                return Ok(None);
            }
            let (l, rp) = simulate_coupled_paths(kernel, key, params.horizon)?;
            let mutual = mutual_levels(&l, &rp, params.guard);
            if !mutual.l_report.contains(2) || !mutual.contains(2) {
                return Ok(None);
            }
            let ok = match mutual.l_report.first_positive_level() {
                Some((level, tl)) => rp.hitting_time(level).is_some_and(|tr| tl > tr),
                None => false,
            };
            Ok(Some(ok))
        })
        .collect::<Result<_>>()?;
    let witnesses = rows.iter().filter(|r| r.is_some()).count();
    Ok(WitnessReport {
        m0,
        replicas: params.replicas,
        witnesses,
        frequency: ProbabilityEstimate::from_counts(witnesses, params.replicas),
        conditional_violations: rows
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Some(false))
            .map(|(i, _)| i as u64)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Construction;
    use crate::walk::simulate_coupled;

    fn path(p: Vec<i64>) -> WalkPath {
        WalkPath::from_positions(p)
    }

    #[test]
    fn monotone_path() {
        let rep = find_regenerations(&path((0..=20).collect()), 5);
        assert_eq!(rep.levels, (0..=15).collect::<Vec<_>>());
        assert!(rep.zero_is_regen);
        assert_eq!(rep.blocks.len(), 15);
        assert_eq!(rep.censor.discarded_edge_blocks, 1);
    }

    #[test]
    fn leftward_path() {
        let rep = find_regenerations(&path((0..=20).map(|m| -m).collect()), 5);
        assert!(rep.levels.is_empty());
        assert!(!rep.zero_is_regen);
        assert!(rep.blocks.is_empty());
    }

    #[test]
    fn first_hit_rule() {
        let mut p = vec![0, 1, 0, 1];
        p.extend(2..=10);
        let rep = find_regenerations(&path(p), 2);
        assert_eq!(rep.levels, vec![0, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(rep.hit_times[..2], [0, 4]);
        assert_eq!(
            rep.blocks[0],
            Block {
                displacement: 2,
                duration: 4
            }
        );
        assert_eq!(rep.first_positive_level(), Some((2, 4)));
    }

    #[test]
    fn blocks_are_consistent() {
        let env = CookieEnvironment::finite([0.9, 0.9, 0.9]).unwrap();
        let p = simulate_erw(&env, SeedKey::new(1, 2), 5000).unwrap();
        let rep = find_regenerations(&p, 20);
        let disp: i64 = rep.blocks.iter().map(|b| b.displacement).sum();
        let dur: usize = rep.blocks.iter().map(|b| b.duration).sum();
        assert_eq!(disp, rep.levels.last().unwrap() - rep.levels[0]);
        assert_eq!(dur, rep.hit_times.last().unwrap() - rep.hit_times[0]);
        for (&x, &t) in rep.levels.iter().zip(&rep.hit_times) {
            assert!(p.positions[t..].iter().all(|&y| y >= x));
        }
    }

    #[test]
    fn larger_guard_never_adds_levels() {
        let env = CookieEnvironment::finite([0.8, 0.8, 0.8]).unwrap();
        for r in 0..20 {
            let p = simulate_erw(&env, SeedKey::new(3, r), 3000).unwrap();
            let small = find_regenerations(&p, 10);
            let large = find_regenerations(&p, 200);
            assert!(large.levels.iter().all(|x| small.contains(*x)));
        }
    }

    #[test]
    fn identity_mutual_levels_match() {
        let k = CouplingKernel::identity(CookieEnvironment::finite([0.9, 0.9, 0.9]).unwrap());
        let s = simulate_coupled(&k, SeedKey::new(5, 0), 3000).unwrap();
        let m = mutual_levels(&s.l_path, &s.r_path, 20);
        assert!(m.report.is_clean());
        assert_eq!(m.levels.len(), m.l_report.levels.len());
        assert!(m.blocks().all(|(_, a, b)| a == b));
    }

    #[test]
    fn mutual_check_flags_corruption() {
        let l = path((0..=40).collect());
        let mut rp: Vec<i64> = vec![0, -1, 0];
        rp.extend(1..=38);
        let m = mutual_levels(&l, &path(rp), 5);
        assert!(m.report.violation_count(Property::IndicatorOrder) == 1);
        assert!(m.report.violation_count(Property::RegenerationInclusion) >= 1);
    }

    #[test]
    fn witness_needs_a_strict_kernel() {
        let k = CouplingKernel::identity(CookieEnvironment::finite([0.9]).unwrap());
        let err = witness_event_frequency(&k, &RunParams::new(1, 10, 100)).unwrap_err();
        assert_eq!(err, Error::NoStrictPrefix);
    }

    #[test]
    fn insufficient_regenerations_for_fair_walk() {
        let env = CookieEnvironment::fair();
        let err = speed_regeneration(&env, &RunParams::new(1, 5, 2000)).unwrap_err();
        assert!(matches!(err, Error::InsufficientRegenerations { .. }));
    }

    #[test]
    fn identity_pair_has_zero_difference() {
        let k = CouplingKernel::identity(CookieEnvironment::finite([0.9, 0.9, 0.9]).unwrap());
        let s = coupled_speed_pair(&k, &RunParams::new(2, 20, 5000).with_resamples(200)).unwrap();
        assert_eq!(s.diff.value, 0.0);
        assert_eq!(s.p.value, s.q.value);
        assert_eq!(s.strict_blocks, 0);
    }

    #[test]
    fn identity_regen_probabilities_match() {
        let k = CouplingKernel::identity(CookieEnvironment::finite([0.9, 0.9, 0.9]).unwrap());
        let pr =
            regen_probability_coupled(&k, &RunParams::new(3, 200, 1000).with_guard(20)).unwrap();
        assert_eq!(pr.p, pr.q);
        assert!(pr.indicator_violations.is_empty());
    }

    #[test]
    fn paired_speeds_ordered() {
        let k = CouplingKernel::new(
            CookieEnvironment::finite([0.7, 0.9, 0.9]).unwrap(),
            Construction::swap(1, 2),
        )
        .unwrap();
        let s = coupled_speed_pair(&k, &RunParams::new(9, 20, 5000).with_resamples(200)).unwrap();
        assert!(s.q.value >= s.p.value);
        assert!(s.diff.value >= 0.0);
        assert!(s.checks.is_clean());
        assert!(s.p.zero_speed_caveat);
    }
}
