//! Excited random walk simulation, single and coupled.
//!
//! Cookies are materialized on demand from counter-addressed streams, so a
//! site's k-th cookie is fixed by `(seed, replica, site, k)` and never by
//! visit order. A coupled run drives both walks from one kernel: the left
//! walk reads the `Y` cookies, the right walk the `Z` cookies of the same
//! sites, which puts both on one probability space with `L ⪯ R`.

use crate::arrows::{first_domination_failure, ArrowSystem, SiteMap, WalkPath};
use crate::coupling::CouplingKernel;
use crate::env::CookieEnvironment;
use crate::error::{Error, Result};
use crate::rng::{bernoulli, CellStream, SeedKey};

/// Cookies drawn per materialization at a site.
const CHUNK: usize = 32;

/// Safety cap on cookies per site.
pub const DEFAULT_COOKIE_CAP: u32 = 1 << 20;

/// Two walks on shared randomness with their arrow systems.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSample {
    pub l_system: ArrowSystem,
    pub r_system: ArrowSystem,
    pub l_path: WalkPath,
    pub r_path: WalkPath,
    pub seed_key: SeedKey,
}

#[derive(Default)]
struct SingleSite {
    departures: u32,
    cells: Vec<bool>,
}

fn extend_single(
    env: &CookieEnvironment,
    stream: &CellStream,
    site: i64,
    cells: &mut Vec<bool>,
    min_end: usize,
) {
    let start = cells.len();
    let end = min_end.max(start + CHUNK);
    let mut words = vec![0u64; end - start];
    stream.fill(site, 0, start as u64, &mut words);
    cells.extend(
        words
            .iter()
            .enumerate()
            .map(|(n, &w)| bernoulli(w, env.cookie_prob(start + n + 1))),
    );
}

/// Runs the walk for `n` steps, calling `visit` with each new position.
fn run_single(
    env: &CookieEnvironment,
    seed_key: SeedKey,
    n: usize,
    cap: u32,
    mut visit: impl FnMut(i64),
) -> Result<SiteMap<SingleSite>> {
    let stream = CellStream::new(seed_key);
    let mut sites: SiteMap<SingleSite> = SiteMap::default();
    let mut x = 0i64;
    for _ in 0..n {
        let s = sites.entry(x);
        s.departures += 1;
        let k = s.departures;
        if k > cap {
            return Err(Error::CookieCap { site: x, cap });
        }
        if k as usize > s.cells.len() {
            extend_single(env, &stream, x, &mut s.cells, k as usize);
        }
        x += if s.cells[k as usize - 1] { 1 } else { -1 };
        visit(x);
    }
    Ok(sites)
}

/// One excited random walk in `env`, `n` steps, reproducible from `seed_key`.
pub fn simulate_erw(env: &CookieEnvironment, seed_key: SeedKey, n: usize) -> Result<WalkPath> {
    simulate_erw_capped(env, seed_key, n, DEFAULT_COOKIE_CAP)
}

pub fn simulate_erw_capped(
    env: &CookieEnvironment,
    seed_key: SeedKey,
    n: usize,
    cap: u32,
) -> Result<WalkPath> {
    let mut positions = Vec::with_capacity(n + 1);
    positions.push(0);
    let sites = run_single(env, seed_key, n, cap, |x| positions.push(x))?;
    let mut local_times = SiteMap::default();
    for (x, s) in sites.iter() {
        *local_times.entry(x) = s.departures;
    }
    Ok(WalkPath {
        positions,
        local_times,
    })
}

/// Position after `n` steps without recording the path.
pub fn simulate_erw_endpoint(env: &CookieEnvironment, seed_key: SeedKey, n: usize) -> Result<i64> {
    let mut last = 0;
    run_single(env, seed_key, n, DEFAULT_COOKIE_CAP, |x| last = x)?;
    Ok(last)
}

#[derive(Default)]
struct PairSite {
    ys: Vec<bool>,
    zs: Vec<bool>,
}

/// Runs both walks on the shared cookie field of `kernel`.
pub fn simulate_coupled(
    kernel: &CouplingKernel,
    seed_key: SeedKey,
    n: usize,
) -> Result<CoupledSample> {
    simulate_coupled_capped(kernel, seed_key, n, DEFAULT_COOKIE_CAP)
}

pub fn simulate_coupled_capped(
    kernel: &CouplingKernel,
    seed_key: SeedKey,
    n: usize,
    cap: u32,
) -> Result<CoupledSample> {
    let stream = CellStream::new(seed_key);
    let mut field: SiteMap<PairSite> = SiteMap::default();

    let mut walk = |right_walk: bool| -> Result<WalkPath> {
        let mut positions = Vec::with_capacity(n + 1);
        let mut local_times: SiteMap<u32> = SiteMap::default();
        let mut x = 0i64;
        positions.push(x);
        for _ in 0..n {
            let lt = local_times.entry(x);
            *lt += 1;
            let k = *lt;
            if k > cap {
                return Err(Error::CookieCap { site: x, cap });
            }
            let site = field.entry(x);
            if k as usize > site.ys.len() {
                let want = (k as usize).max(site.ys.len() + CHUNK);
                kernel.extend_site(&stream, x, want, &mut site.ys, &mut site.zs);
            }
            let cells = if right_walk { &site.zs } else { &site.ys };
            x += if cells[k as usize - 1] { 1 } else { -1 };
            positions.push(x);
        }
        Ok(WalkPath {
            positions,
            local_times,
        })
    };
    let l_path = walk(false)?;
    let r_path = walk(true)?;

    let mut ys: SiteMap<Vec<bool>> = SiteMap::default();
    let mut zs: SiteMap<Vec<bool>> = SiteMap::default();
    if let Some(range) = field.range() {
        for x in range {
            let site = field.entry(x);
            *ys.entry(x) = std::mem::take(&mut site.ys);
            *zs.entry(x) = std::mem::take(&mut site.zs);
        }
    }
    let sample = CoupledSample {
        l_system: ArrowSystem::from_sites(ys),
        r_system: ArrowSystem::from_sites(zs),
        l_path,
        r_path,
        seed_key,
    };
    if let Some((site, visit)) = first_domination_failure(&sample.l_system, &sample.r_system) {
        return Err(Error::CouplingViolation {
            replica: seed_key.replica,
            what: format!("arrow prefix domination fails at site {site}, visit {visit}"),
        });
    }
    Ok(sample)
}

/// Only the two paths; skips assembling the arrow systems.
pub(crate) fn simulate_coupled_paths(
    kernel: &CouplingKernel,
    seed_key: SeedKey,
    n: usize,
) -> Result<(WalkPath, WalkPath)> {
    let s = simulate_coupled(kernel, seed_key, n)?;
    Ok((s.l_path, s.r_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrows::{check_theorem_order_properties, walk_from_arrows, Property};
    use crate::coupling::Construction;

    fn fin(p: &[f64]) -> CookieEnvironment {
        CookieEnvironment::finite(p.to_vec()).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let env = fin(&[0.9, 0.2, 0.7]);
        let a = simulate_erw(&env, SeedKey::new(4, 17), 500).unwrap();
        let b = simulate_erw(&env, SeedKey::new(4, 17), 500).unwrap();
        let c = simulate_erw(&env, SeedKey::new(4, 18), 500).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.positions, c.positions);
        assert!(a.is_nearest_neighbour());
        assert_eq!(
            simulate_erw_endpoint(&env, SeedKey::new(4, 17), 500).unwrap(),
            a.end()
        );
    }

    #[test]
    fn local_times_count_departures() {
        let env = fin(&[0.6]);
        let path = simulate_erw(&env, SeedKey::new(1, 1), 300).unwrap();
        for (x, &d) in path.local_times.iter() {
            let expect = path.positions[..300].iter().filter(|&&y| y == x).count();
            assert_eq!(d as usize, expect);
        }
    }

    #[test]
    fn left_walk_is_the_single_walk() {
        let p = fin(&[0.7, 0.9, 0.9]);
        let k = CouplingKernel::new(p.clone(), Construction::swap(1, 2)).unwrap();
        for r in 0..20 {
            let key = SeedKey::new(8, r);
            let s = simulate_coupled(&k, key, 400).unwrap();
            assert_eq!(s.l_path, simulate_erw(&p, key, 400).unwrap());
        }
    }

    #[test]
    fn identity_paths_coincide() {
        let k = CouplingKernel::identity(fin(&[0.8, 0.3]));
        let s = simulate_coupled(&k, SeedKey::new(2, 0), 1000).unwrap();
        assert_eq!(s.l_path, s.r_path);
        assert_eq!(s.l_system, s.r_system);
    }

    #[test]
    fn arrows_replay_paths() {
        let k = CouplingKernel::new(
            fin(&[0.9, 0.9, 0.9]),
            Construction::pointwise(fin(&[0.95, 0.9, 0.9])),
        )
        .unwrap();
        let s = simulate_coupled(&k, SeedKey::new(3, 5), 800).unwrap();
        assert_eq!(walk_from_arrows(&s.l_system, 800).unwrap(), s.l_path);
        assert_eq!(walk_from_arrows(&s.r_system, 800).unwrap(), s.r_path);
        // cells are materialized in chunks, but never far beyond what was read
        let visited = s.l_system.site_range().map_or(0, |r| r.count());
        assert!(s.l_system.cell_count() <= 800 + CHUNK * visited * 2);
    }

    #[test]
    fn cookie_cap_aborts() {
        let env = CookieEnvironment::fair();
        let err = simulate_erw_capped(&env, SeedKey::new(0, 0), 10_000, 4).unwrap_err();
        assert!(matches!(err, Error::CookieCap { cap: 4, .. }));
    }

    #[test]
    fn coupled_checks_pass() {
        let k = CouplingKernel::new(fin(&[0.7, 0.9, 0.9]), Construction::swap(1, 2)).unwrap();
        for r in 0..50 {
            let s = simulate_coupled(&k, SeedKey::new(12, r), 1000).unwrap();
            let rep = check_theorem_order_properties(&s, 1000);
            assert!(rep.is_clean(), "{:?}", rep.violations);
            assert!(rep.checked(Property::RunningMaxOrder) > 0);
        }
    }
}
