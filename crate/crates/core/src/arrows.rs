//! Arrow systems, the walks they drive, and path-wise ordering checks.
//!
//! An arrow system assigns a step in `{-1, +1}` to every (site, visit) pair.
//! The walk it determines starts at 0 and, on its k-th departure from x,
//! moves by the arrow at (x, k). Arrow systems are compared cumulatively:
//! `L ⪯ R` when, at every site, each prefix sum of L's arrows is at most the
//! matching prefix sum of R's.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::{self, Write as _};
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::regen;
use crate::walk::CoupledSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Left,
    Right,
}

impl Step {
    #[inline]
    pub fn from_right(right: bool) -> Self {
        if right {
            Step::Right
        } else {
            Step::Left
        }
    }

    #[inline]
    pub fn delta(self) -> i64 {
        match self {
            Step::Left => -1,
            Step::Right => 1,
        }
    }

    pub fn is_right(self) -> bool {
        self == Step::Right
    }
}

/// Per-site values over a contiguous window of sites that grows at either end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteMap<T> {
    origin: i64,
    cells: VecDeque<T>,
}

impl<T> Default for SiteMap<T> {
    fn default() -> Self {
        Self {
            origin: 0,
            cells: VecDeque::new(),
        }
    }
}

impl<T: Default> SiteMap<T> {
    #[inline]
    pub fn entry(&mut self, site: i64) -> &mut T {
        if self.cells.is_empty() {
            self.origin = site;
            self.cells.push_back(T::default());
        }
        while site < self.origin {
            self.cells.push_front(T::default());
            self.origin -= 1;
        }
        let idx = (site - self.origin) as usize;
        while idx >= self.cells.len() {
            self.cells.push_back(T::default());
        }
        &mut self.cells[idx]
    }
}

impl<T> SiteMap<T> {
    #[inline]
    pub fn get(&self, site: i64) -> Option<&T> {
        if site < self.origin {
            return None;
        }
        self.cells.get((site - self.origin) as usize)
    }

    /// Covered sites, if any.
    pub fn range(&self) -> Option<RangeInclusive<i64>> {
        if self.cells.is_empty() {
            None
        } else {
            Some(self.origin..=self.origin + self.cells.len() as i64 - 1)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &T)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.origin + i as i64, v))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Lazily materialized arrow system. Cells hold `true` for a right arrow.
///
/// Reads beyond the materialized cells fall back to `default` when one is set
/// and are `None` otherwise; nothing is ever drawn on read.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrowSystem {
    sites: SiteMap<Vec<bool>>,
    default: Option<Step>,
}

impl ArrowSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every arrow equal to `step`.
    pub fn constant(step: Step) -> Self {
        Self {
            sites: SiteMap::default(),
            default: Some(step),
        }
    }

    pub fn with_default(mut self, step: Step) -> Self {
        self.default = Some(step);
        self
    }

    pub(crate) fn from_sites(sites: SiteMap<Vec<bool>>) -> Self {
        Self {
            sites,
            default: None,
        }
    }

    /// Sets arrow `(site, visit)`; earlier unset visits take the default.
    ///
    /// # Panics
    ///
    /// Panics if `visit == 0`, or if earlier visits are unset and there is no default.
    pub fn set(&mut self, site: i64, visit: u32, step: Step) {
        assert!(visit >= 1, "visits start at 1");
        let default = self.default;
        let cells = self.sites.entry(site);
        let idx = visit as usize - 1;
        while cells.len() < idx {
            let fill = default.expect("gap in arrow sequence without a default");
            cells.push(fill.is_right());
        }
        if idx < cells.len() {
            cells[idx] = step.is_right();
        } else {
            cells.push(step.is_right());
        }
    }

    pub fn push(&mut self, site: i64, step: Step) {
        self.sites.entry(site).push(step.is_right());
    }

    /// Arrow at `(site, visit)`, falling back to the default.
    #[inline]
    pub fn get(&self, site: i64, visit: u32) -> Option<Step> {
        self.materialized(site, visit).or(self.default)
    }

    /// Arrow at `(site, visit)` only if it was materialized.
    #[inline]
    pub fn materialized(&self, site: i64, visit: u32) -> Option<Step> {
        if visit == 0 {
            return None;
        }
        self.sites
            .get(site)
            .and_then(|c| c.get(visit as usize - 1))
            .map(|&b| Step::from_right(b))
    }

    /// Materialized depth at `site`.
    pub fn depth(&self, site: i64) -> usize {
        self.sites.get(site).map_or(0, Vec::len)
    }

    pub fn cell_count(&self) -> usize {
        self.sites.iter().map(|(_, c)| c.len()).sum()
    }

    pub fn site_range(&self) -> Option<RangeInclusive<i64>> {
        self.sites.range()
    }

    /// Reverses the arrow at `(site, visit)`; used to build negative controls.
    pub fn flip(&mut self, site: i64, visit: u32) -> Result<()> {
        let cell = self
            .sites
            .entry(site)
            .get_mut(visit as usize - 1)
            .ok_or(Error::NotMaterialized { site, visit })?;
        *cell = !*cell;
        Ok(())
    }

    /// Parses the arrow-table format: one line per site, `x: s_1 s_2 ... s_K`
    /// with each `s` one of `+` or `-` (U+2212 also accepted). Blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut sys = ArrowSystem::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: n + 1, msg };
            let (site, rest) = line
                .split_once(':')
                .ok_or_else(|| parse_err("expected `site: arrows`".into()))?;
            let site: i64 = site
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad site `{}`: {e}", site.trim())))?;
            if sys.depth(site) > 0 {
                return Err(parse_err(format!("site {site} listed twice")));
            }
            for tok in rest.split_whitespace() {
                let step = match tok {
                    "+" => Step::Right,
                    "-" | "\u{2212}" => Step::Left,
                    other => return Err(parse_err(format!("bad arrow `{other}`"))),
                };
                sys.push(site, step);
            }
        }
        Ok(sys)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (site, cells) in self.sites.iter() {
            if cells.is_empty() {
                continue;
            }
            let _ = write!(out, "{site}:");
            for &b in cells {
                out.push(' ');
                out.push(if b { '+' } else { '-' });
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ArrowSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// A nearest-neighbour path `X_0 = 0, X_1, ..., X_n` and its departure counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    pub positions: Vec<i64>,
    pub local_times: SiteMap<u32>,
}

impl WalkPath {
    /// Builds a path from positions, recomputing departure counts.
    pub fn from_positions(positions: Vec<i64>) -> Self {
        assert_eq!(positions.first(), Some(&0), "paths start at 0");
        let mut local_times = SiteMap::default();
        for &x in &positions[..positions.len() - 1] {
            *local_times.entry(x) += 1;
        }
        Self {
            positions,
            local_times,
        }
    }

    /// Number of steps.
    pub fn horizon(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn end(&self) -> i64 {
        *self.positions.last().expect("non-empty path")
    }

    /// First time the path is at `x`; `None` when censored by the horizon.
    pub fn hitting_time(&self, x: i64) -> Option<usize> {
        hitting_time(self, x)
    }

    /// Times the path sits at `x` strictly before time `before`.
    pub fn visits_before(&self, x: i64, before: usize) -> usize {
        self.positions[..before.min(self.positions.len())]
            .iter()
            .filter(|&&y| y == x)
            .count()
    }

    pub fn departures(&self, x: i64) -> u32 {
        self.local_times.get(x).copied().unwrap_or(0)
    }

    pub fn is_nearest_neighbour(&self) -> bool {
        self.positions.windows(2).all(|w| (w[1] - w[0]).abs() == 1)
    }

    /// First hitting times of levels `1..=max`, indexed by level - 1.
    pub fn first_hits_positive(&self) -> Vec<usize> {
        let mut hits = Vec::new();
        let mut top = 0i64;
        for (t, &x) in self.positions.iter().enumerate() {
            if x > top {
                debug_assert_eq!(x, top + 1);
                top = x;
                hits.push(t);
            }
        }
        hits
    }
}

/// First `m` with `X_m = x`, or `None` when the path never reaches `x`.
pub fn hitting_time(path: &WalkPath, x: i64) -> Option<usize> {
    path.positions.iter().position(|&y| y == x)
}

/// The walk determined by `system`, run for `n` steps.
pub fn walk_from_arrows(system: &ArrowSystem, n: usize) -> Result<WalkPath> {
    let mut positions = Vec::with_capacity(n + 1);
    let mut local_times: SiteMap<u32> = SiteMap::default();
    let mut x = 0i64;
    positions.push(x);
    for _ in 0..n {
        let visits = local_times.entry(x);
        *visits += 1;
        let k = *visits;
        let step = system
            .get(x, k)
            .ok_or(Error::NotMaterialized { site: x, visit: k })?;
        x += step.delta();
        positions.push(x);
    }
    Ok(WalkPath {
        positions,
        local_times,
    })
}

/// `L ⪯ R` on the window `sites × 1..=depth`; errors if a cell is missing
/// from either system.
pub fn prefix_dominates(
    l: &ArrowSystem,
    r: &ArrowSystem,
    sites: RangeInclusive<i64>,
    depth: u32,
) -> Result<bool> {
    for x in sites {
        let mut gap = 0i64;
        for k in 1..=depth {
            let a = l
                .get(x, k)
                .ok_or(Error::NotMaterialized { site: x, visit: k })?;
            let b = r
                .get(x, k)
                .ok_or(Error::NotMaterialized { site: x, visit: k })?;
            gap += b.delta() - a.delta();
            if gap < 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `L ⪯ R` on every cell materialized in both systems. Returns the first
/// violating `(site, visit)`.
pub fn first_domination_failure(l: &ArrowSystem, r: &ArrowSystem) -> Option<(i64, u32)> {
    for (x, lc) in l.sites.iter() {
        let Some(rc) = r.sites.get(x) else { continue };
        let mut gap = 0i64;
        for (k, (&a, &b)) in lc.iter().zip(rc).enumerate() {
            gap += b as i64 - a as i64;
            if gap < 0 {
                return Some((x, k as u32 + 1));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Property {
    PrefixDomination,
    HittingTimeOrder,
    RunningMaxOrder,
    RunningMinOrder,
    VisitCountOrder,
    RegenerationInclusion,
    BlockDurationOrder,
    IndicatorOrder,
}

impl Property {
    pub const ALL: [Property; 8] = [
        Property::PrefixDomination,
        Property::HittingTimeOrder,
        Property::RunningMaxOrder,
        Property::RunningMinOrder,
        Property::VisitCountOrder,
        Property::RegenerationInclusion,
        Property::BlockDurationOrder,
        Property::IndicatorOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::PrefixDomination => "prefix_domination",
            Property::HittingTimeOrder => "hitting_time_order",
            Property::RunningMaxOrder => "running_max_order",
            Property::RunningMinOrder => "running_min_order",
            Property::VisitCountOrder => "visit_count_order",
            Property::RegenerationInclusion => "regeneration_inclusion",
            Property::BlockDurationOrder => "block_duration_order",
            Property::IndicatorOrder => "indicator_order",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub property: Property,
    pub detail: String,
}

/// Tally of path-wise checks: how many instances were evaluated per property
/// and every violation found.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checked: BTreeMap<Property, u64>,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation_count(&self, property: Property) -> usize {
        self.violations
            .iter()
            .filter(|v| v.property == property)
            .count()
    }

    pub fn checked(&self, property: Property) -> u64 {
        self.checked.get(&property).copied().unwrap_or(0)
    }

    pub(crate) fn tally(&mut self, property: Property, count: u64) {
        *self.checked.entry(property).or_default() += count;
    }

    pub(crate) fn violate(&mut self, property: Property, detail: String) {
        self.violations.push(Violation { property, detail });
    }

    pub fn merge(&mut self, other: PropertyReport) {
        for (p, c) in other.checked {
            self.tally(p, c);
        }
        self.violations.extend(other.violations);
    }
}

/// Hitting-time and running extrema ordering of two paths of equal horizon.
pub fn check_path_order(l: &WalkPath, r: &WalkPath) -> PropertyReport {
    let mut rep = PropertyReport::default();
    let l_hits = l.first_hits_positive();
    let r_hits = r.first_hits_positive();
    for (i, &tl) in l_hits.iter().enumerate() {
        let level = i + 1;
        match r_hits.get(i) {
            Some(&tr) if tr <= tl => {}
            Some(&tr) => rep.violate(
                Property::HittingTimeOrder,
                format!("level {level}: R hits at {tr} after L at {tl}"),
            ),
            None => rep.violate(
                Property::HittingTimeOrder,
                format!("level {level}: L hits at {tl}, R censored"),
            ),
        }
    }
    rep.tally(Property::HittingTimeOrder, l_hits.len() as u64);

    let (mut lmax, mut lmin, mut rmax, mut rmin) = (0i64, 0i64, 0i64, 0i64);
    let n = l.positions.len().min(r.positions.len());
    for m in 0..n {
        lmax = lmax.max(l.positions[m]);
        lmin = lmin.min(l.positions[m]);
        rmax = rmax.max(r.positions[m]);
        rmin = rmin.min(r.positions[m]);
        if lmax > rmax {
            rep.violate(
                Property::RunningMaxOrder,
                format!("time {m}: max L = {lmax} > max R = {rmax}"),
            );
        }
        if lmin > rmin {
            rep.violate(
                Property::RunningMinOrder,
                format!("time {m}: min L = {lmin} > min R = {rmin}"),
            );
        }
    }
    rep.tally(Property::RunningMaxOrder, n as u64);
    rep.tally(Property::RunningMinOrder, n as u64);
    rep
}

/// Visit counts at levels left of `level`, counted up to each walk's first
/// hit of `level`: L's count must dominate R's.
pub fn check_visit_counts(l: &WalkPath, r: &WalkPath, level: i64) -> PropertyReport {
    let mut rep = PropertyReport::default();
    let (Some(tl), Some(tr)) = (l.hitting_time(level), r.hitting_time(level)) else {
        return rep;
    };
    let mut lc: SiteMap<u64> = SiteMap::default();
    let mut rc: SiteMap<u64> = SiteMap::default();
    l.positions[..tl].iter().for_each(|&x| *lc.entry(x) += 1);
    r.positions[..tr].iter().for_each(|&x| *rc.entry(x) += 1);
    let lo = lc
        .range()
        .map_or(0, |r| *r.start())
        .min(rc.range().map_or(0, |r| *r.start()));
    for x in lo..level {
        let a = lc.get(x).copied().unwrap_or(0);
        let b = rc.get(x).copied().unwrap_or(0);
        if a < b {
            rep.violate(
                Property::VisitCountOrder,
                format!("site {x} left of level {level}: L visits {a} < R visits {b}"),
            );
        }
    }
    rep.tally(Property::VisitCountOrder, (level - lo).max(0) as u64);
    rep
}

/// Path-wise ordering checks on a coupled sample run to horizon `n`:
/// prefix domination of the arrow systems, hitting-time order, running
/// max/min order, and the visit-count proxy left of the last mutual
/// regeneration level (confirmed with the default guard).
pub fn check_theorem_order_properties(sample: &CoupledSample, n: usize) -> PropertyReport {
    check_theorem_order_properties_with_guard(sample, n, regen::DEFAULT_GUARD)
}

pub fn check_theorem_order_properties_with_guard(
    sample: &CoupledSample,
    n: usize,
    guard: usize,
) -> PropertyReport {
    let mut rep = PropertyReport::default();
    rep.tally(
        Property::PrefixDomination,
        sample.l_system.cell_count() as u64,
    );
    if let Some((x, k)) = first_domination_failure(&sample.l_system, &sample.r_system) {
        rep.violate(
            Property::PrefixDomination,
            format!("site {x}, visit {k}: cumulative L arrows exceed R"),
        );
    }

    let l = truncate(&sample.l_path, n);
    let r = truncate(&sample.r_path, n);
    rep.merge(check_path_order(&l, &r));

    let mutual = regen::mutual_levels(&l, &r, guard);
    if let Some(&(level, _, _)) = mutual.levels.last() {
        rep.merge(check_visit_counts(&l, &r, level));
    }
    rep
}

fn truncate(path: &WalkPath, n: usize) -> WalkPath {
    if path.horizon() <= n {
        path.clone()
    } else {
        WalkPath::from_positions(path.positions[..=n].to_vec())
    }
}
