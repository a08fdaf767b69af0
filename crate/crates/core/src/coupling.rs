//! Monotone couplings of two cookie environments.
//!
//! A [`CouplingKernel`] produces, at every site, a pair of cookie sequences
//! `(Y_1, Y_2, ...)` and `(Z_1, Z_2, ...)` with independent Bernoulli
//! marginals `Ber(p_k)` and `Ber(q_k)` such that every prefix sum of `Y` is
//! at most the matching prefix sum of `Z`. Kernels are built from two
//! generators, pointwise increases and favorable swaps, chained in stages:
//! stage `s` consumes the output sequence of stage `s - 1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{CookieEnvironment, Form};
use crate::error::{Error, Result};
use crate::rng::{bernoulli, unit, CellStream, SeedKey};
use crate::stats::KahanSum;

/// Largest depth accepted by [`CouplingKernel::exact_joint_distribution`].
pub const MAX_EXACT_DEPTH: usize = 12;
/// Largest depth enumerated internally once swap partners are included.
const MAX_INTERNAL_DEPTH: usize = 18;

/// How `q` is obtained from `p`; also the kernel wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "lowercase")]
pub enum Construction {
    Identity,
    /// Raise some cookies to those of `q`.
    #[serde(rename = "pointwise")]
    PointwiseIncrease {
        q: CookieEnvironment,
    },
    /// Exchange cookies `swap[0] < swap[1]` (1-based) with the later one stronger.
    #[serde(rename = "swap")]
    FavorableSwap {
        swap: [usize; 2],
    },
    #[serde(rename = "compose")]
    Composition {
        compose: Vec<Construction>,
    },
}

impl Construction {
    pub fn pointwise(q: CookieEnvironment) -> Self {
        Construction::PointwiseIncrease { q }
    }

    pub fn swap(i: usize, j: usize) -> Self {
        Construction::FavorableSwap { swap: [i, j] }
    }

    pub fn compose(parts: impl Into<Vec<Construction>>) -> Self {
        Construction::Composition {
            compose: parts.into(),
        }
    }
}

/// Conditional probability of turning a `(0, 1)` pair into `(1, 0)` so that a
/// swap of `p_i < p_j` keeps both marginals independent Bernoulli.
pub fn swap_mixing_coefficient(p_i: f64, p_j: f64) -> Result<f64> {
    if p_j <= p_i {
        return Err(Error::Kernel(format!(
            "swap needs p_j > p_i, got p_i = {p_i}, p_j = {p_j}"
        )));
    }
    if !(0.0 < p_i && p_j < 1.0) {
        return Err(Error::Kernel("swap cookies must lie in (0, 1)".into()));
    }
    Ok((p_j - p_i) / ((1.0 - p_i) * p_j))
}

#[derive(Debug, Clone, PartialEq)]
enum StageKind {
    Pointwise,
    Swap {
        i: usize,
        j: usize,
        /// Pair repeats every `period` cells.
        period: Option<usize>,
        coef: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Stage {
    input: CookieEnvironment,
    output: CookieEnvironment,
    kind: StageKind,
}

impl Stage {
    /// Probability that a 0 becomes 1 at cell `k` (1-based).
    fn lift(&self, k: usize) -> f64 {
        let p = self.input.cookie_prob(k);
        let q = self.output.cookie_prob(k);
        if q > p {
            (q - p) / (1.0 - p)
        } else {
            0.0
        }
    }

    /// Swap pairs `(a, b)` with `a <= upto`, via callback.
    fn for_pairs_upto(&self, upto: usize, mut f: impl FnMut(usize, usize)) {
        if let StageKind::Swap { i, j, period, .. } = self.kind {
            match period {
                None => {
                    if i <= upto {
                        f(i, j)
                    }
                }
                Some(m) => {
                    let mut a = i;
                    let mut b = j;
                    while a <= upto {
                        f(a, b);
                        a += m;
                        b += m;
                    }
                }
            }
        }
    }

    /// Right partner of the last pair starting at or before `end`.
    fn reach(&self, end: usize) -> usize {
        match self.kind {
            StageKind::Pointwise => end,
            StageKind::Swap { i, j, period, .. } => {
                if end < i {
                    return end;
                }
                match period {
                    None => end.max(j),
                    Some(m) => end.max(j + (end - i) / m * m),
                }
            }
        }
    }

    fn first_strict(&self) -> Option<usize> {
        match self.kind {
            StageKind::Swap { i, .. } => Some(i),
            StageKind::Pointwise => {
                let horizon = match (self.input.fair_after(), self.output.fair_after()) {
                    (Some(a), Some(b)) => a.max(b),
                    _ => self.input.len().max(self.output.len()),
                };
                (1..=horizon).find(|&k| self.output.cookie_prob(k) > self.input.cookie_prob(k))
            }
        }
    }
}

/// Joint per-site law of `(Y, Z)` realizing `p` below `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingKernel {
    p_env: CookieEnvironment,
    q_env: CookieEnvironment,
    construction: Construction,
    stages: Vec<Stage>,
}

fn pad_to(env: &CookieEnvironment, len: usize) -> Vec<f64> {
    (1..=len.max(env.len()))
        .map(|k| env.cookie_prob(k))
        .collect()
}

fn same_law(a: &CookieEnvironment, b: &CookieEnvironment) -> bool {
    if a.form() != b.form() {
        return false;
    }
    match a.form() {
        Form::FiniteExcitation => {
            let n = a.len().max(b.len());
            (1..=n).all(|k| a.cookie_prob(k) == b.cookie_prob(k))
        }
        Form::Periodic => {
            let n = a.len() * b.len();
            (1..=n).all(|k| a.cookie_prob(k) == b.cookie_prob(k))
        }
    }
}

fn build_stages(
    input: &CookieEnvironment,
    construction: &Construction,
    stages: &mut Vec<Stage>,
) -> Result<CookieEnvironment> {
    match construction {
        Construction::Identity => Ok(input.clone()),
        Construction::PointwiseIncrease { q } => {
            if q.form() != input.form() {
                return Err(Error::Kernel(
                    "pointwise increase needs both environments in the same form".into(),
                ));
            }
            let horizon = match input.form() {
                Form::FiniteExcitation => input.len().max(q.len()),
                Form::Periodic => {
                    if q.len() != input.len() {
                        return Err(Error::Kernel(format!(
                            "pointwise increase needs equal periods, got {} and {}",
                            input.len(),
                            q.len()
                        )));
                    }
                    input.len()
                }
            };
            let mut strict = false;
            for k in 1..=horizon {
                let (p, qk) = (input.cookie_prob(k), q.cookie_prob(k));
                if p > qk {
                    return Err(Error::Kernel(format!(
                        "pointwise increase fails at index {k}: p = {p} > q = {qk}"
                    )));
                }
                strict |= qk > p;
            }
            if !strict {
                return Err(Error::Kernel(
                    "pointwise increase needs q_k > p_k for at least one k".into(),
                ));
            }
            stages.push(Stage {
                input: input.clone(),
                output: q.clone(),
                kind: StageKind::Pointwise,
            });
            Ok(q.clone())
        }
        Construction::FavorableSwap { swap: [i, j] } => {
            let (i, j) = (*i, *j);
            if i == 0 || j == 0 {
                return Err(Error::Kernel("swap indices start at 1".into()));
            }
            if i >= j {
                return Err(Error::Kernel(format!("swap ({i}, {j}) requires i < j")));
            }
            let period = match input.form() {
                Form::Periodic => {
                    if j > input.len() {
                        return Err(Error::Kernel(format!(
                            "swap ({i}, {j}) exceeds the period {}",
                            input.len()
                        )));
                    }
                    Some(input.len())
                }
                Form::FiniteExcitation => None,
            };
            let (pi, pj) = (input.cookie_prob(i), input.cookie_prob(j));
            if pj <= pi {
                return Err(Error::Kernel(format!(
                    "swap ({i}, {j}) is not favorable: p_{i} = {pi}, p_{j} = {pj}"
                )));
            }
            let coef = swap_mixing_coefficient(pi, pj)?;
            let mut probs = pad_to(input, j);
            probs.swap(i - 1, j - 1);
            let output = CookieEnvironment::new(input.form(), probs)?;
            stages.push(Stage {
                input: input.clone(),
                output: output.clone(),
                kind: StageKind::Swap { i, j, period, coef },
            });
            Ok(output)
        }
        Construction::Composition { compose } => {
            let mut current = input.clone();
            for (n, part) in compose.iter().enumerate() {
                current = build_stages(&current, part, stages).map_err(|e| match e {
                    Error::Kernel(msg) => {
                        Error::Kernel(format!("composition step {}: {msg}", n + 1))
                    }
                    other => other,
                })?;
            }
            Ok(current)
        }
    }
}

impl CouplingKernel {
    /// Builds the kernel and the environment `q` it couples `p` to.
    pub fn new(p_env: CookieEnvironment, construction: Construction) -> Result<Self> {
        let mut stages = Vec::new();
        let q_env = build_stages(&p_env, &construction, &mut stages)?;
        Ok(Self {
            p_env,
            q_env,
            construction,
            stages,
        })
    }

    pub fn identity(p_env: CookieEnvironment) -> Self {
        Self::new(p_env, Construction::Identity).expect("identity is always valid")
    }

    /// Like [`CouplingKernel::new`] but also checks the construction lands on `q_env`.
    pub fn from_parts(
        p_env: CookieEnvironment,
        q_env: CookieEnvironment,
        construction: Construction,
    ) -> Result<Self> {
        validate_kernel(&p_env, &q_env, &construction)?;
        Self::new(p_env, construction)
    }

    pub fn p_env(&self) -> &CookieEnvironment {
        &self.p_env
    }

    pub fn q_env(&self) -> &CookieEnvironment {
        &self.q_env
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }

    /// Least prefix length at which `sum Y < sum Z` has positive probability.
    ///
    /// Every stage only adds to the prefix-sum gap, so this is the least
    /// first-strict index over stages.
    pub fn m0(&self) -> Result<usize> {
        self.stages
            .iter()
            .filter_map(Stage::first_strict)
            .min()
            .ok_or(Error::NoStrictPrefix)
    }

    /// Smallest end (1-based, inclusive) at least `end` that closes every swap pair.
    pub(crate) fn closure_end(&self, end: usize) -> usize {
        let mut end = end;
        loop {
            let next = self.stages.iter().fold(end, |acc, s| s.reach(acc));
            if next == end {
                return end;
            }
            end = next;
        }
    }

    /// Appends cells `ys.len() + 1 ..= end` to both sequences, where `end` is at
    /// least `min_end` and closes every swap pair. `ys` and `zs` must hold the
    /// same number of cells and come from earlier calls for the same site.
    pub(crate) fn extend_site(
        &self,
        stream: &CellStream,
        site: i64,
        min_end: usize,
        ys: &mut Vec<bool>,
        zs: &mut Vec<bool>,
    ) {
        debug_assert_eq!(ys.len(), zs.len());
        let start = ys.len();
        let end = self.closure_end(min_end.max(start));
        if end == start {
            return;
        }
        let mut words = vec![0u64; end - start];
        stream.fill(site, 0, start as u64, &mut words);
        let mut cur: Vec<bool> = words
            .iter()
            .enumerate()
            .map(|(n, &w)| bernoulli(w, self.p_env.cookie_prob(start + n + 1)))
            .collect();
        ys.extend_from_slice(&cur);

        for (s, stage) in self.stages.iter().enumerate() {
            let stage_id = u8::try_from(s + 1).expect("at most 255 kernel stages");
            stream.fill(site, stage_id, start as u64, &mut words);
            match stage.kind {
                StageKind::Pointwise => {
                    for (n, bit) in cur.iter_mut().enumerate() {
                        if !*bit {
                            *bit = bernoulli(words[n], stage.lift(start + n + 1));
                        }
                    }
                }
                StageKind::Swap { coef, .. } => {
                    stage.for_pairs_upto(end, |a, b| {
                        if a <= start {
                            return;
                        }
                        let (ia, ib) = (a - 1 - start, b - 1 - start);
                        if !cur[ia] && cur[ib] && unit(words[ia]) < coef {
                            cur[ia] = true;
                            cur[ib] = false;
                        }
                    });
                }
            }
        }
        zs.extend_from_slice(&cur);
    }

    /// One site's `(Y_1..Y_depth, Z_1..Z_depth)`.
    ///
    /// # Panics
    ///
    /// Panics if prefix-sum domination fails, which means the kernel is broken.
    pub fn sample_site_pair(
        &self,
        seed_key: SeedKey,
        site: i64,
        depth: usize,
    ) -> (Vec<bool>, Vec<bool>) {
        assert!(depth >= 1, "depth must be positive");
        let stream = CellStream::new(seed_key);
        let (mut ys, mut zs) = (Vec::new(), Vec::new());
        self.extend_site(&stream, site, depth, &mut ys, &mut zs);
        ys.truncate(depth);
        zs.truncate(depth);
        assert!(
            prefix_dominated(&ys, &zs),
            "kernel produced a pair violating prefix domination at site {site}"
        );
        (ys, zs)
    }

    /// Exact law of the first `depth` cells of `(Y, Z)` at one site.
    pub fn exact_joint_distribution(&self, depth: usize) -> Result<JointTable> {
        if depth == 0 || depth > MAX_EXACT_DEPTH {
            return Err(Error::HorizonGuard {
                requested: depth,
                limit: MAX_EXACT_DEPTH,
            });
        }
        let full = self.closure_end(depth);
        if full > MAX_INTERNAL_DEPTH {
            return Err(Error::HorizonGuard {
                requested: full,
                limit: MAX_INTERNAL_DEPTH,
            });
        }

        let mut y_law: Vec<(u32, f64)> = vec![(0, 1.0)];
        for k in 1..=full {
            let p = self.p_env.cookie_prob(k);
            let bit = 1u32 << (k - 1);
            y_law = y_law
                .into_iter()
                .flat_map(|(bits, w)| [(bits | bit, w * p), (bits, w * (1.0 - p))])
                .collect();
        }

        let mask = (1u32 << depth) - 1;
        let mut acc: BTreeMap<(u16, u16), KahanSum> = BTreeMap::new();
        for (y, wy) in y_law {
            let mut law: Vec<(u32, f64)> = vec![(y, wy)];
            for stage in &self.stages {
                law = self.apply_stage_exact(stage, full, law);
            }
            for (z, w) in law {
                if w > 0.0 {
                    acc.entry(((y & mask) as u16, (z & mask) as u16))
                        .or_default()
                        .add(w);
                }
            }
        }
        Ok(JointTable {
            depth,
            atoms: acc.into_iter().map(|(k, v)| (k, v.value())).collect(),
        })
    }

    fn apply_stage_exact(
        &self,
        stage: &Stage,
        full: usize,
        law: Vec<(u32, f64)>,
    ) -> Vec<(u32, f64)> {
        match stage.kind {
            StageKind::Pointwise => {
                let mut law = law;
                for k in 1..=full {
                    let lift = stage.lift(k);
                    if lift == 0.0 {
                        continue;
                    }
                    let bit = 1u32 << (k - 1);
                    law = law
                        .into_iter()
                        .flat_map(|(z, w)| {
                            if z & bit != 0 {
                                vec![(z, w)]
                            } else {
                                vec![(z | bit, w * lift), (z, w * (1.0 - lift))]
                            }
                        })
                        .collect();
                }
                law
            }
            StageKind::Swap { coef, .. } => {
                let mut pairs = Vec::new();
                stage.for_pairs_upto(full, |a, b| pairs.push((a, b)));
                let mut law = law;
                for (a, b) in pairs {
                    let (ba, bb) = (1u32 << (a - 1), 1u32 << (b - 1));
                    law = law
                        .into_iter()
                        .flat_map(|(z, w)| {
                            if z & ba == 0 && z & bb != 0 {
                                vec![((z | ba) & !bb, w * coef), (z, w * (1.0 - coef))]
                            } else {
                                vec![(z, w)]
                            }
                        })
                        .collect();
                }
                law
            }
        }
    }
}

/// Checks that `construction` is admissible from `p` and produces `q`.
pub fn validate_kernel(
    p: &CookieEnvironment,
    q: &CookieEnvironment,
    construction: &Construction,
) -> Result<()> {
    let mut stages = Vec::new();
    let derived = build_stages(p, construction, &mut stages)?;
    if !same_law(&derived, q) {
        return Err(Error::Kernel(format!(
            "construction maps {p} to {derived}, not {q}"
        )));
    }
    Ok(())
}

/// Every prefix sum of `ys` is at most the matching prefix sum of `zs`.
pub fn prefix_dominated(ys: &[bool], zs: &[bool]) -> bool {
    let mut gap = 0i64;
    for (&y, &z) in ys.iter().zip(zs) {
        gap += z as i64 - y as i64;
        if gap < 0 {
            return false;
        }
    }
    true
}

/// Exact joint law of one site's cookie prefixes. Bit `k - 1` holds cell `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub depth: usize,
    pub atoms: BTreeMap<(u16, u16), f64>,
}

impl JointTable {
    pub fn total(&self) -> f64 {
        let mut s = KahanSum::default();
        self.atoms.values().for_each(|&w| s.add(w));
        s.value()
    }

    pub fn prob(&self, ys: &[bool], zs: &[bool]) -> f64 {
        let key = (pack(ys), pack(zs));
        self.atoms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn y_marginal(&self) -> BTreeMap<u16, f64> {
        marginal(self.atoms.iter().map(|(&(y, _), &w)| (y, w)))
    }

    pub fn z_marginal(&self) -> BTreeMap<u16, f64> {
        marginal(self.atoms.iter().map(|(&(_, z), &w)| (z, w)))
    }

    /// Law of the first `len` cells.
    pub fn prefix(&self, len: usize) -> BTreeMap<(u16, u16), f64> {
        assert!(len <= self.depth);
        let mask = ((1u32 << len) - 1) as u16;
        let mut acc: BTreeMap<(u16, u16), KahanSum> = BTreeMap::new();
        for (&(y, z), &w) in &self.atoms {
            acc.entry((y & mask, z & mask)).or_default().add(w);
        }
        acc.into_iter().map(|(k, v)| (k, v.value())).collect()
    }

    /// Probability that some prefix of length `<= depth` has `sum Y < sum Z`.
    pub fn strict_somewhere(&self) -> f64 {
        self.strict_mass(|ys, zs| (1..=self.depth).any(|m| prefix_sum(ys, m) < prefix_sum(zs, m)))
    }

    /// Probability that `sum_{j<=m} Y_j < sum_{j<=m} Z_j`.
    pub fn strict_at(&self, m: usize) -> f64 {
        assert!(m >= 1 && m <= self.depth);
        self.strict_mass(|ys, zs| prefix_sum(ys, m) < prefix_sum(zs, m))
    }

    /// Least `m` with `strict_at(m) > 0` within the table depth.
    pub fn first_strict(&self) -> Option<usize> {
        (1..=self.depth).find(|&m| self.strict_at(m) > 0.0)
    }

    fn strict_mass(&self, pred: impl Fn(u16, u16) -> bool) -> f64 {
        let mut s = KahanSum::default();
        for (&(y, z), &w) in &self.atoms {
            if pred(y, z) {
                s.add(w);
            }
        }
        s.value()
    }
}

fn prefix_sum(bits: u16, m: usize) -> u32 {
    (bits as u32 & ((1u32 << m) - 1)).count_ones()
}

fn pack(bits: &[bool]) -> u16 {
    bits.iter()
        .enumerate()
        .fold(0u16, |acc, (i, &b)| acc | ((b as u16) << i))
}

fn marginal(iter: impl Iterator<Item = (u16, f64)>) -> BTreeMap<u16, f64> {
    let mut acc: BTreeMap<u16, KahanSum> = BTreeMap::new();
    for (k, w) in iter {
        acc.entry(k).or_default().add(w);
    }
    acc.into_iter().map(|(k, v)| (k, v.value())).collect()
}

/// Product Bernoulli law of the first `depth` cookies, keyed like [`JointTable`].
pub fn product_law(env: &CookieEnvironment, depth: usize) -> BTreeMap<u16, f64> {
    (0u32..1 << depth)
        .map(|bits| {
            let w = (1..=depth)
                .map(|k| {
                    let p = env.cookie_prob(k);
                    if bits & (1 << (k - 1)) != 0 {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product();
            (bits as u16, w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(p: &[f64]) -> CookieEnvironment {
        CookieEnvironment::finite(p.to_vec()).unwrap()
    }

    #[test]
    fn validate_examples() {
        let p = fin(&[0.9, 0.9, 0.9]);
        let q = fin(&[0.95, 0.9, 0.9]);
        assert!(validate_kernel(&p, &q, &Construction::pointwise(q.clone())).is_ok());

        let p = fin(&[0.7, 0.9, 0.9]);
        let k = CouplingKernel::new(p.clone(), Construction::swap(1, 2)).unwrap();
        assert_eq!(k.q_env().probs(), &[0.9, 0.7, 0.9]);

        let err = CouplingKernel::new(p, Construction::swap(2, 1)).unwrap_err();
        assert!(err.to_string().contains("requires i < j"), "{err}");
    }

    #[test]
    fn validate_reports_first_failure() {
        let p = fin(&[0.6, 0.6, 0.6]);
        let q = fin(&[0.7, 0.5, 0.4]);
        let err = CouplingKernel::new(p.clone(), Construction::pointwise(q)).unwrap_err();
        assert!(err.to_string().contains("index 2"), "{err}");
        let err = CouplingKernel::new(p.clone(), Construction::pointwise(p.clone())).unwrap_err();
        assert!(err.to_string().contains("at least one"), "{err}");
        let err = CouplingKernel::new(p, Construction::swap(1, 2)).unwrap_err();
        assert!(err.to_string().contains("not favorable"), "{err}");
    }

    #[test]
    fn validate_composition_chains() {
        let p = fin(&[0.7, 0.9, 0.9]);
        let c = Construction::compose(vec![
            Construction::swap(1, 2),
            Construction::pointwise(fin(&[0.95, 0.7, 0.9])),
        ]);
        let k = CouplingKernel::new(p.clone(), c.clone()).unwrap();
        assert_eq!(k.q_env().probs(), &[0.95, 0.7, 0.9]);
        assert!(validate_kernel(&p, &fin(&[0.95, 0.7, 0.9]), &c).is_ok());
        assert!(validate_kernel(&p, &fin(&[0.9, 0.7, 0.9]), &c).is_err());

        // second step would need p_2 > p_1 after the first swap
        let bad = Construction::compose(vec![Construction::swap(1, 2), Construction::swap(1, 2)]);
        let err = CouplingKernel::new(p, bad).unwrap_err();
        assert!(err.to_string().contains("composition step 2"), "{err}");
    }

    #[test]
    fn swap_into_the_fair_tail() {
        let k = CouplingKernel::new(fin(&[0.3]), Construction::swap(1, 3)).unwrap();
        // p_3 = 1/2 > 0.3
        assert_eq!(k.q_env().probs(), &[0.5, 0.5, 0.3]);
    }

    #[test]
    fn mixing_coefficient() {
        let a = swap_mixing_coefficient(0.3, 0.7).unwrap();
        assert!((a - 0.4 / 0.49).abs() < 1e-15);
        assert!((a - 0.816326530612245).abs() < 1e-12);
        let a = swap_mixing_coefficient(0.1, 0.9).unwrap();
        assert!((a - 0.8 / 0.81).abs() < 1e-15);
        assert!(swap_mixing_coefficient(0.5, 0.5).is_err());
    }

    #[test]
    fn m0_values() {
        let p = fin(&[0.9, 0.9, 0.9]);
        let k = CouplingKernel::new(p.clone(), Construction::pointwise(fin(&[0.95, 0.9, 0.9])))
            .unwrap();
        assert_eq!(k.m0().unwrap(), 1);
        let k = CouplingKernel::new(p.clone(), Construction::pointwise(fin(&[0.9, 0.9, 0.95])))
            .unwrap();
        assert_eq!(k.m0().unwrap(), 3);
        let k =
            CouplingKernel::new(fin(&[0.5, 0.2, 0.5, 0.5, 0.8]), Construction::swap(2, 5)).unwrap();
        assert_eq!(k.m0().unwrap(), 2);
        assert_eq!(
            k.exact_joint_distribution(5).unwrap().first_strict(),
            Some(2)
        );
        assert_eq!(CouplingKernel::identity(p).m0(), Err(Error::NoStrictPrefix));
    }

    #[test]
    fn identity_pairs_are_equal() {
        let k = CouplingKernel::identity(fin(&[0.7, 0.2]));
        for site in -3..3 {
            let (y, z) = k.sample_site_pair(SeedKey::new(5, 1), site, 40);
            assert_eq!(y, z);
        }
        let t = k.exact_joint_distribution(1).unwrap();
        assert_eq!(t.atoms.len(), 2);
        assert!((t.prob(&[true], &[true]) - 0.7).abs() < 1e-15);
        assert!((t.prob(&[false], &[false]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn pointwise_is_elementwise_monotone() {
        let k = CouplingKernel::new(
            fin(&[0.2, 0.5, 0.1]),
            Construction::pointwise(fin(&[0.6, 0.5, 0.3])),
        )
        .unwrap();
        for r in 0..200 {
            let (y, z) = k.sample_site_pair(SeedKey::new(9, r), 0, 8);
            assert!(y.iter().zip(&z).all(|(&a, &b)| b >= a));
        }
    }

    #[test]
    fn swap_joint_atoms() {
        let k = CouplingKernel::new(fin(&[0.3, 0.7]), Construction::swap(1, 2)).unwrap();
        let t = k.exact_joint_distribution(2).unwrap();
        assert!((t.total() - 1.0).abs() < 1e-15);
        assert!((t.prob(&[false, true], &[true, false]) - 0.4).abs() < 1e-12);
        assert!((t.prob(&[true, false], &[true, false]) - 0.09).abs() < 1e-12);
        assert!((t.prob(&[true, true], &[true, true]) - 0.21).abs() < 1e-12);
        assert!((t.strict_somewhere() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn exact_depth_guard() {
        let k = CouplingKernel::identity(fin(&[0.3]));
        assert!(matches!(
            k.exact_joint_distribution(13),
            Err(Error::HorizonGuard { .. })
        ));
        assert!(k.exact_joint_distribution(0).is_err());
    }

    #[test]
    fn periodic_swap_repeats_every_period() {
        let p = CookieEnvironment::periodic([0.3, 0.8]).unwrap();
        let k = CouplingKernel::new(p, Construction::swap(1, 2)).unwrap();
        assert_eq!(k.q_env().probs(), &[0.8, 0.3]);
        let t = k.exact_joint_distribution(6).unwrap();
        let zm = t.z_marginal();
        let want = product_law(k.q_env(), 6);
        for (bits, w) in want {
            assert!((zm.get(&bits).copied().unwrap_or(0.0) - w).abs() < 1e-12);
        }
    }

    #[test]
    fn chunking_does_not_change_draws() {
        let p = CookieEnvironment::periodic([0.2, 0.5, 0.9]).unwrap();
        let k = CouplingKernel::new(
            p,
            Construction::compose(vec![
                Construction::swap(1, 3),
                Construction::pointwise(CookieEnvironment::periodic([0.95, 0.55, 0.7]).unwrap()),
                Construction::swap(2, 3),
            ]),
        )
        .unwrap();
        let stream = CellStream::new(SeedKey::new(3, 4));
        let (mut y1, mut z1) = (Vec::new(), Vec::new());
        k.extend_site(&stream, 2, 100, &mut y1, &mut z1);
        let (mut y2, mut z2) = (Vec::new(), Vec::new());
        let mut end = 1;
        while y2.len() < 100 {
            k.extend_site(&stream, 2, end, &mut y2, &mut z2);
            end += 7;
        }
        let n = 100.min(y2.len());
        assert_eq!(y1[..n], y2[..n]);
        assert_eq!(z1[..n], z2[..n]);
        assert!(prefix_dominated(&y1, &z1));
    }

    #[test]
    fn kernel_wire_format() {
        let json = r#"{"construction":"compose","compose":[
            {"construction":"swap","swap":[1,2]},
            {"construction":"pointwise","q":{"form":"finite","probs":[0.95,0.7,0.9]}},
            {"construction":"identity"}]}"#;
        let c: Construction = serde_json::from_str(json).unwrap();
        let k = CouplingKernel::new(fin(&[0.7, 0.9, 0.9]), c).unwrap();
        assert_eq!(k.q_env().probs(), &[0.95, 0.7, 0.9]);
    }
}
