//! Exact laws of walks and coupled walk pairs at small horizons by brute-force
//! enumeration. Paths are encoded as step bits: bit `m` is set when step
//! `m + 1` goes right.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::arrows::WalkPath;
use crate::coupling::CouplingKernel;
use crate::env::CookieEnvironment;
use crate::error::{Error, Result};
use crate::stats::KahanSum;

pub const MAX_PATH_HORIZON: usize = 20;
pub const MAX_COUPLED_HORIZON: usize = 8;
pub const MAX_DOMINANCE_HORIZON: usize = 14;
pub const DOMINANCE_TOL: f64 = 1e-12;

/// Steps enumerated up front and then split across threads.
const SPLIT_DEPTH: usize = 4;

/// Exact probabilities of outcomes with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution<K: Ord> {
    pub horizon: usize,
    pub atoms: BTreeMap<K, f64>,
}

pub type PathDistribution = ExactDistribution<u32>;
pub type PairDistribution = ExactDistribution<(u32, u32)>;

impl<K: Ord> ExactDistribution<K> {
    pub fn total(&self) -> f64 {
        self.atoms.values().copied().collect::<KahanSum>().value()
    }

    pub fn prob(&self, outcome: &K) -> f64 {
        self.atoms.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn event_prob(&self, mut event: impl FnMut(&K) -> bool) -> f64 {
        self.atoms
            .iter()
            .filter(|(k, _)| event(k))
            .map(|(_, &w)| w)
            .collect::<KahanSum>()
            .value()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl PathDistribution {
    pub fn path(&self, bits: u32) -> WalkPath {
        WalkPath::from_positions(positions(bits, self.horizon))
    }
}

impl PairDistribution {
    pub fn left_marginal(&self) -> PathDistribution {
        self.marginal(|&(l, _)| l)
    }

    pub fn right_marginal(&self) -> PathDistribution {
        self.marginal(|&(_, r)| r)
    }

    fn marginal(&self, pick: impl Fn(&(u32, u32)) -> u32) -> PathDistribution {
        let mut acc: BTreeMap<u32, KahanSum> = BTreeMap::new();
        for (k, &w) in &self.atoms {
            acc.entry(pick(k)).or_default().add(w);
        }
        ExactDistribution {
            horizon: self.horizon,
            atoms: acc.into_iter().map(|(k, s)| (k, s.value())).collect(),
        }
    }
}

/// Positions `X_0..=X_n` of an encoded path.
pub fn positions(bits: u32, n: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = 0;
    out.push(x);
    for m in 0..n {
        x += if bits >> m & 1 == 1 { 1 } else { -1 };
        out.push(x);
    }
    out
}

/// Encodes a nearest-neighbour path starting at 0.
pub fn encode(positions: &[i64]) -> u32 {
    positions
        .windows(2)
        .enumerate()
        .fold(0, |acc, (m, w)| acc | (((w[1] > w[0]) as u32) << m))
}

fn guard(requested: usize, limit: usize) -> Result<()> {
    if requested > limit {
        Err(Error::HorizonGuard { requested, limit })
    } else {
        Ok(())
    }
}

/// Walk state for enumeration; sites are offset by `n` into `visits`.
#[derive(Clone)]
struct WalkState {
    x: i64,
    visits: Vec<u32>,
    bits: u32,
    prob: f64,
}

impl WalkState {
    fn start(n: usize) -> Self {
        Self {
            x: 0,
            visits: vec![0; 2 * n + 1],
            bits: 0,
            prob: 1.0,
        }
    }

    fn idx(&self, n: usize) -> usize {
        (self.x + n as i64) as usize
    }

    fn step(&self, n: usize, m: usize, p: f64, right: bool) -> Self {
        let mut s = self.clone();
        let i = s.idx(n);
        s.visits[i] += 1;
        s.prob *= if right { p } else { 1.0 - p };
        if right {
            s.bits |= 1 << m;
            s.x += 1;
        } else {
            s.x -= 1;
        }
        s
    }
}

fn expand_single(
    env: &CookieEnvironment,
    n: usize,
    m: usize,
    s: WalkState,
    out: &mut Vec<(u32, f64)>,
) {
    if m == n {
        out.push((s.bits, s.prob));
        return;
    }
    let p = env.cookie_prob(s.visits[s.idx(n)] as usize + 1);
    for right in [false, true] {
        let next = s.step(n, m, p, right);
        if next.prob > 0.0 {
            expand_single(env, n, m + 1, next, out);
        }
    }
}

/// Exact law of the first `n` steps of the walk in `env`.
pub fn exact_path_distribution(env: &CookieEnvironment, n: usize) -> Result<PathDistribution> {
    guard(n, MAX_PATH_HORIZON)?;
    let split = n.min(SPLIT_DEPTH);
    let mut roots = Vec::new();
    expand_single(env, split, 0, WalkState::start(n), &mut roots);
    // the prefixes were expanded with offset `split`; redo them with offset `n`
    let roots: Vec<WalkState> = roots
        .into_iter()
        .map(|(bits, _)| replay(env, n, bits, split))
        .filter(|s| s.prob > 0.0)
        .collect();
    let parts: Vec<Vec<(u32, f64)>> = roots
        .into_par_iter()
        .map(|root| {
            let mut out = Vec::new();
            expand_single(env, n, split, root, &mut out);
            out
        })
        .collect();
    Ok(ExactDistribution {
        horizon: n,
        atoms: parts.into_iter().flatten().collect(),
    })
}

fn replay(env: &CookieEnvironment, n: usize, bits: u32, steps: usize) -> WalkState {
    let mut s = WalkState::start(n);
    for m in 0..steps {
        let p = env.cookie_prob(s.visits[s.idx(n)] as usize + 1);
        s = s.step(n, m, p, bits >> m & 1 == 1);
    }
    s
}

/// Marginal probabilities `P(Y_1..a = y, Z_1..b = z)` of one site's cells.
struct PrefixLaw {
    probs: HashMap<(u8, u16, u8, u16), f64>,
}

impl PrefixLaw {
    fn new(kernel: &CouplingKernel, depth: usize) -> Result<Self> {
        let table = kernel.exact_joint_distribution(depth)?;
        let mut acc: HashMap<(u8, u16, u8, u16), KahanSum> = HashMap::new();
        for (&(y, z), &w) in &table.atoms {
            for a in 0..=depth {
                for b in 0..=depth {
                    let key = (a as u8, y & mask(a), b as u8, z & mask(b));
                    acc.entry(key).or_default().add(w);
                }
            }
        }
        Ok(Self {
            probs: acc.into_iter().map(|(k, s)| (k, s.value())).collect(),
        })
    }

    fn get(&self, cell: &Cells) -> f64 {
        self.probs
            .get(&(cell.ny, cell.y, cell.nz, cell.z))
            .copied()
            .unwrap_or(0.0)
    }
}

fn mask(len: usize) -> u16 {
    ((1u32 << len) - 1) as u16
}

/// Revealed cells of one site.
#[derive(Clone, Copy, Default)]
struct Cells {
    ny: u8,
    y: u16,
    nz: u8,
    z: u16,
}

#[derive(Clone)]
struct PairState {
    cells: Vec<Cells>,
    l: WalkState,
    r: WalkState,
}

fn expand_pair(
    law: &PrefixLaw,
    n: usize,
    m: usize,
    s: PairState,
    out: &mut Vec<((u32, u32), f64)>,
) {
    if m == 2 * n {
        out.push(((s.l.bits, s.r.bits), s.l.prob));
        return;
    }
    let right_walk = m >= n;
    let walk = if right_walk { &s.r } else { &s.l };
    let i = walk.idx(n);
    let k = walk.visits[i] as usize + 1;
    // each walk reads its k-th cell at a site on its k-th departure, so the
    // cell is always a fresh reveal for that walk
    let before = law.get(&s.cells[i]);
    for right in [false, true] {
        let mut next = s.clone();
        let w = if right_walk { &mut next.r } else { &mut next.l };
        w.visits[i] += 1;
        if right {
            w.bits |= 1 << (m % n);
            w.x += 1;
        } else {
            w.x -= 1;
        }
        let c = &mut next.cells[i];
        if right_walk {
            debug_assert_eq!(c.nz as usize, k - 1);
            c.nz += 1;
            c.z |= (right as u16) << (k - 1);
        } else {
            debug_assert_eq!(c.ny as usize, k - 1);
            c.ny += 1;
            c.y |= (right as u16) << (k - 1);
        }
        let after = law.get(c);
        if after == 0.0 {
            continue;
        }
        next.l.prob *= after / before;
        expand_pair(law, n, m + 1, next, out);
    }
}

/// Exact joint law of the left and right walks driven by `kernel` for `n` steps.
pub fn exact_coupled_distribution(kernel: &CouplingKernel, n: usize) -> Result<PairDistribution> {
    guard(n, MAX_COUPLED_HORIZON)?;
    if n == 0 {
        return Ok(ExactDistribution {
            horizon: 0,
            atoms: BTreeMap::from([((0, 0), 1.0)]),
        });
    }
    let law = PrefixLaw::new(kernel, n)?;
    let start = PairState {
        cells: vec![Cells::default(); 2 * n + 1],
        l: WalkState::start(n),
        r: WalkState::start(n),
    };
    let mut out = Vec::new();
    expand_pair(&law, n, 0, start, &mut out);
    Ok(ExactDistribution {
        horizon: n,
        atoms: out.into_iter().collect(),
    })
}

/// One compared quantity in a dominance report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailComparison {
    pub threshold: i64,
    /// Time index for hitting-time CDFs, horizon otherwise.
    pub time: usize,
    pub p: f64,
    pub q: f64,
}

impl TailComparison {
    pub fn violates(&self) -> bool {
        self.p > self.q + DOMINANCE_TOL
    }

    pub fn equal(&self) -> bool {
        (self.p - self.q).abs() <= DOMINANCE_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub horizon: usize,
    /// `P(max_{m<=n} X_m >= x)` for `x = 0..=n`.
    pub max_tail: Vec<TailComparison>,
    /// `P(min_{m<=n} X_m >= x)` for `x = -n..=0`.
    pub min_tail: Vec<TailComparison>,
    /// `P(T_x <= t)` for `1 <= x <= t <= n`.
    pub hitting_cdf: Vec<TailComparison>,
}

impl DominanceReport {
    fn all(&self) -> impl Iterator<Item = &TailComparison> {
        self.max_tail
            .iter()
            .chain(&self.min_tail)
            .chain(&self.hitting_cdf)
    }

    pub fn violations(&self) -> Vec<TailComparison> {
        self.all().filter(|c| c.violates()).copied().collect()
    }

    pub fn holds(&self) -> bool {
        self.all().all(|c| !c.violates())
    }

    pub fn all_equal(&self) -> bool {
        self.all().all(TailComparison::equal)
    }
}

struct PathSummary {
    max: i64,
    min: i64,
    /// First hitting times of levels `1..`.
    hits: Vec<usize>,
    weight: f64,
}

fn summarize(d: &PathDistribution) -> Vec<PathSummary> {
    d.atoms
        .iter()
        .map(|(&bits, &weight)| {
            let pos = positions(bits, d.horizon);
            PathSummary {
                max: *pos.iter().max().expect("non-empty"),
                min: *pos.iter().min().expect("non-empty"),
                hits: WalkPath::from_positions(pos).first_hits_positive(),
                weight,
            }
        })
        .collect()
}

fn mass(rows: &[PathSummary], event: &dyn Fn(&PathSummary) -> bool) -> f64 {
    rows.iter()
        .filter(|r| event(r))
        .map(|r| r.weight)
        .collect::<KahanSum>()
        .value()
}

/// Compares running-extremum tails and hitting-time CDFs of the exact laws of
/// the `p` and `q` walks at horizon `n`.
pub fn exact_dominance_check(
    p: &CookieEnvironment,
    q: &CookieEnvironment,
    n: usize,
) -> Result<DominanceReport> {
    guard(n, MAX_DOMINANCE_HORIZON)?;
    let dp = exact_path_distribution(p, n)?;
    let dq = exact_path_distribution(q, n)?;
    let ni = n as i64;
    let sp = summarize(&dp);
    let sq = summarize(&dq);
    let compare = |threshold: i64, time: usize, f: &dyn Fn(&PathSummary) -> bool| TailComparison {
        threshold,
        time,
        p: mass(&sp, f),
        q: mass(&sq, f),
    };
    let max_tail = (0..=ni).map(|x| compare(x, n, &|r| r.max >= x)).collect();
    let min_tail = (-ni..=0).map(|x| compare(x, n, &|r| r.min >= x)).collect();
    let mut hitting_cdf = Vec::new();
    for x in 1..=ni {
        for t in x as usize..=n {
            hitting_cdf.push(compare(x, t, &|r| {
                r.hits.get(x as usize - 1).is_some_and(|&h| h <= t)
            }));
        }
    }
    Ok(DominanceReport {
        horizon: n,
        max_tail,
        min_tail,
        hitting_cdf,
    })
}

/// Dominance check on the two environments of a kernel.
pub fn exact_kernel_dominance(kernel: &CouplingKernel, n: usize) -> Result<DominanceReport> {
    exact_dominance_check(kernel.p_env(), kernel.q_env(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Construction;

    fn fin(p: &[f64]) -> CookieEnvironment {
        CookieEnvironment::finite(p.to_vec()).unwrap()
    }

    #[test]
    fn fair_two_steps() {
        let d = exact_path_distribution(&CookieEnvironment::fair(), 2).unwrap();
        assert_eq!(d.len(), 4);
        assert!((d.prob(&0b11) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_cookie_first_step() {
        let d = exact_path_distribution(&fin(&[0.9]), 1).unwrap();
        assert!((d.prob(&1) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn hit_one_within_three() {
        let d = exact_path_distribution(&fin(&[0.9]), 3).unwrap();
        let p = d.event_prob(|&b| positions(b, 3).contains(&1));
        assert!((p - 0.945).abs() < 1e-12);
    }

    #[test]
    fn path_probability_is_product_of_cookies() {
        let env = fin(&[0.7, 0.2, 0.9]);
        let d = exact_path_distribution(&env, 10).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert_eq!(d.len(), 1 << 10);
        // 0 -> 1 -> 0 -> -1 -> 0 -> 1: cookies (0,1) (1,1) (0,2) (-1,1) (0,3)
        let bits = encode(&[0, 1, 0, -1, 0, 1]);
        let d5 = exact_path_distribution(&env, 5).unwrap();
        let expect = 0.7 * 0.3 * 0.8 * 0.7 * 0.9;
        assert!((d5.prob(&bits) - expect).abs() < 1e-15);
    }

    #[test]
    fn encode_roundtrip() {
        for bits in 0..64u32 {
            assert_eq!(encode(&positions(bits, 6)), bits);
        }
    }

    #[test]
    fn horizon_guards() {
        let env = fin(&[0.9]);
        assert!(matches!(
            exact_path_distribution(&env, 21),
            Err(Error::HorizonGuard { limit: 20, .. })
        ));
        let k = CouplingKernel::identity(env.clone());
        assert!(exact_coupled_distribution(&k, 9).is_err());
        assert!(exact_dominance_check(&env, &env, 15).is_err());
    }

    #[test]
    fn identity_joint_is_diagonal() {
        let env = fin(&[0.8, 0.3]);
        let k = CouplingKernel::identity(env.clone());
        let d = exact_coupled_distribution(&k, 6).unwrap();
        assert!(d.atoms.keys().all(|(l, r)| l == r));
        let single = exact_path_distribution(&env, 6).unwrap();
        for (&(l, _), &w) in &d.atoms {
            assert!((w - single.prob(&l)).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_marginals_and_order() {
        let p = fin(&[0.7, 0.9]);
        let k = CouplingKernel::new(p.clone(), Construction::swap(1, 2)).unwrap();
        let d = exact_coupled_distribution(&k, 6).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        let lp = exact_path_distribution(&p, 6).unwrap();
        let rq = exact_path_distribution(k.q_env(), 6).unwrap();
        for (b, w) in d.left_marginal().atoms {
            assert!((w - lp.prob(&b)).abs() < 1e-10);
        }
        for (b, w) in d.right_marginal().atoms {
            assert!((w - rq.prob(&b)).abs() < 1e-10);
        }
        assert!(d.atoms.keys().any(|(l, r)| l != r));
    }

    #[test]
    fn dominance_examples() {
        let p = fin(&[0.9]);
        assert!(exact_dominance_check(&p, &p, 6).unwrap().all_equal());

        let rep = exact_dominance_check(&p, &fin(&[0.95]), 6).unwrap();
        assert!(rep.holds());
        assert!(rep.max_tail[1].q > rep.max_tail[1].p);
        let first_step = rep.hitting_cdf[0];
        assert_eq!((first_step.threshold, first_step.time), (1, 1));
        assert!((first_step.q - first_step.p - 0.05).abs() < 1e-12);

        let rep = exact_dominance_check(&fin(&[0.7, 0.9]), &fin(&[0.9, 0.7]), 8).unwrap();
        assert!(rep.holds());
    }

    #[test]
    fn dominance_detects_reversal() {
        let rep = exact_dominance_check(&fin(&[0.95]), &fin(&[0.9]), 4).unwrap();
        assert!(!rep.holds());
    }
}
