use rayon::prelude::*;
use serde_json::{json, Value};

use erw_core::arrows::{check_theorem_order_properties_with_guard, ArrowSystem};
use erw_core::env::{Delta, EnvDiagnostics};
use erw_core::oracle::{self, positions};
use erw_core::regen::{self, mutual_regeneration_check, SpeedEstimate, SENSITIVITY_GUARDS};
use erw_core::*;

use crate::config::{ExperimentConfig, OracleMode};
use crate::report::{joined, num, opt, Failure, Report, SCHEMA_VERSION};

/// Violations listed in full in the JSON report; the rest are only counted.
const LISTED_VIOLATIONS: usize = 100;

fn delta_value(d: &Delta) -> String {
    match d {
        Delta::Finite(v) => num(*v),
        Delta::PlusInfinity => "+inf".into(),
        Delta::MinusInfinity => "-inf".into(),
        Delta::Undefined => String::new(),
    }
}

fn diagnostics_json(env: &CookieEnvironment, d: &EnvDiagnostics) -> Value {
    json!({
        "env": env,
        "delta": d.delta,
        "pbar": d.pbar,
        "theta": d.theta,
        "classification": d.label(),
        "boundary": d.boundary,
        "positive_speed": d.positive_speed(),
    })
}

const CLASSIFY_HEADER: [&str; 7] = [
    "form",
    "probs",
    "delta",
    "pbar",
    "theta",
    "classification",
    "boundary",
];

fn diagnostics_row(env: &CookieEnvironment, d: &EnvDiagnostics) -> Vec<String> {
    vec![
        json!(env.form()).as_str().unwrap_or_default().to_string(),
        joined(env.probs()),
        delta_value(&d.delta),
        opt(d.pbar),
        opt(d.theta),
        d.label(),
        d.boundary.to_string(),
    ]
}

pub fn classify(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    let env = cfg.env()?;
    let d = env.classify();
    let mut body = diagnostics_json(env, &d);
    body["schema_version"] = json!(SCHEMA_VERSION);
    body["command"] = json!("classify");
    Ok(Report {
        json: body,
        header: CLASSIFY_HEADER.to_vec(),
        rows: vec![diagnostics_row(env, &d)],
        failure: None,
    })
}

fn kernel_or_identity(cfg: &ExperimentConfig) -> Result<CouplingKernel, Failure> {
    Ok(match cfg.kernel()? {
        Some(k) => k,
        None => CouplingKernel::identity(cfg.env()?.clone()),
    })
}

/// Reverses one arrow so that prefix domination fails at that cell: the first
/// right arrow of `R` whose cumulative surplus over `L` is at most one, or
/// failing that the first left arrow of `L` with the same property.
fn inject_flip(l: &mut ArrowSystem, r: &mut ArrowSystem) -> Option<(&'static str, i64, u32)> {
    let sites: Vec<i64> = r.site_range()?.collect();
    for flip_right in [true, false] {
        for &x in &sites {
            let depth = l.depth(x).min(r.depth(x)) as u32;
            let mut gap = 0i64;
            for k in 1..=depth {
                let (a, b) = (l.get(x, k)?, r.get(x, k)?);
                gap += b.delta() - a.delta();
                let hit = if flip_right {
                    b.is_right()
                } else {
                    !a.is_right()
                };
                if hit && gap <= 1 {
                    return if flip_right {
                        r.flip(x, k).ok().map(|_| ("R", x, k))
                    } else {
                        l.flip(x, k).ok().map(|_| ("L", x, k))
                    };
                }
            }
        }
    }
    None
}

struct ReplicaCheck {
    replica: u64,
    report: PropertyReport,
    injected: Option<(&'static str, i64, u32)>,
}

fn check_replica(
    kernel: &CouplingKernel,
    cfg: &ExperimentConfig,
    replica: u64,
    inject: bool,
) -> ReplicaCheck {
    let key = SeedKey::new(cfg.seed, replica);
    let mut sample = match walk::simulate_coupled(kernel, key, cfg.horizon) {
        Ok(s) => s,
        Err(e) => {
            let mut report = PropertyReport::default();
            report.violations.push(Violation {
                property: Property::PrefixDomination,
                detail: e.to_string(),
            });
            return ReplicaCheck {
                replica,
                report,
                injected: None,
            };
        }
    };
    let mut injected = None;
    if inject {
        injected = inject_flip(&mut sample.l_system, &mut sample.r_system);
        // replay both walks on the modified arrows; cells never drawn default to the walk's own side
        let l_sys = sample.l_system.clone().with_default(Step::Right);
        let r_sys = sample.r_system.clone().with_default(Step::Left);
        sample.l_path = walk_from_arrows(&l_sys, cfg.horizon).expect("defaults cover every cell");
        sample.r_path = walk_from_arrows(&r_sys, cfg.horizon).expect("defaults cover every cell");
    }
    let mut report = check_theorem_order_properties_with_guard(&sample, cfg.horizon, cfg.guard);
    report.merge(mutual_regeneration_check(&sample, cfg.guard));
    ReplicaCheck {
        replica,
        report,
        injected,
    }
}

const CHECK_HEADER: [&str; 4] = ["scope", "property", "checked", "violations"];

pub fn check(
    cfg: &ExperimentConfig,
    negative_control: bool,
    replica: Option<u64>,
) -> Result<Report, Failure> {
    cfg.validate_run()?;
    let kernel = kernel_or_identity(cfg)?;
    let replicas: Vec<u64> = match replica {
        Some(r) => vec![r],
        None => (0..cfg.replicas as u64).collect(),
    };
    let first = replicas[0];
    let results: Vec<ReplicaCheck> = replicas
        .par_iter()
        .map(|&r| check_replica(&kernel, cfg, r, negative_control && r == first))
        .collect();

    let mut total = PropertyReport::default();
    let mut listed = Vec::new();
    let mut injected = None;
    for res in results {
        for v in &res.report.violations {
            if listed.len() < LISTED_VIOLATIONS {
                listed.push(json!({
                    "replica": res.replica,
                    "property": v.property.name(),
                    "detail": v.detail,
                    "replay": { "seed": cfg.seed, "replica": res.replica },
                }));
            }
        }
        injected = injected.or(res.injected.map(|(walk, site, visit)| {
            json!({ "walk": walk, "site": site, "visit": visit, "replica": res.replica })
        }));
        total.merge(res.report);
    }

    let mut rows = Vec::new();
    let mut checked = serde_json::Map::new();
    for p in Property::ALL {
        let n = total.checked(p);
        let v = total.violation_count(p);
        checked.insert(p.name().into(), json!({ "checked": n, "violations": v }));
        rows.push(vec![
            "monte-carlo".into(),
            p.name().into(),
            n.to_string(),
            v.to_string(),
        ]);
    }

    let mut exact = Value::Null;
    let mut exact_violations = 0;
    if cfg.exact_horizon > 0 && replica.is_none() {
        let n = cfg.exact_horizon;
        let joint = oracle::exact_coupled_distribution(&kernel, n)?;
        let violating = joint
            .atoms
            .iter()
            .filter(|(&(l, r), &w)| {
                w > 0.0
                    && !check_path_order(
                        &WalkPath::from_positions(positions(l, n)),
                        &WalkPath::from_positions(positions(r, n)),
                    )
                    .is_clean()
            })
            .count();
        let dominance = oracle::exact_dominance_check(kernel.p_env(), kernel.q_env(), n)?;
        let failed_tails = dominance.violations().len();
        exact_violations = violating + failed_tails;
        rows.push(vec![
            "exact".into(),
            "path_order_atoms".into(),
            joint.len().to_string(),
            violating.to_string(),
        ]);
        rows.push(vec![
            "exact".into(),
            "law_dominance".into(),
            (dominance.max_tail.len() + dominance.min_tail.len() + dominance.hitting_cdf.len())
                .to_string(),
            failed_tails.to_string(),
        ]);
        exact = json!({
            "horizon": n,
            "atoms": joint.len(),
            "violating_atoms": violating,
            "identical_laws": dominance.all_equal(),
            "dominance_violations": dominance.violations(),
        });
    }

    let violations = total.violations.len() + exact_violations;
    let json = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "check",
        "env": kernel.p_env(),
        "q_env": kernel.q_env(),
        "kernel": kernel.construction(),
        "seed": cfg.seed,
        "replicas": replicas.len(),
        "first_replica": first,
        "horizon": cfg.horizon,
        "guard": cfg.guard,
        "negative_control": injected,
        "monte_carlo": { "checks": checked, "violations": total.violations.len(), "listed": listed },
        "exact": exact,
        "violations": violations,
    });
    let failure = (violations > 0).then(|| {
        let replay = listed
            .first()
            .map(|v| {
                format!(
                    "; replay with --seed {} --replica {}",
                    cfg.seed, v["replica"]
                )
            })
            .unwrap_or_default();
        Failure::Violation(format!("{violations} property violations{replay}"))
    });
    Ok(Report {
        json,
        header: CHECK_HEADER.to_vec(),
        rows,
        failure,
    })
}

const SPEED_HEADER: [&str; 11] = [
    "estimator",
    "guard",
    "value",
    "ci95_lo",
    "ci95_hi",
    "ci99_lo",
    "ci99_hi",
    "blocks",
    "replicas",
    "caveat",
    "error",
];

fn speed_row(name: &str, guard: Option<usize>, s: &Result<SpeedEstimate>) -> Vec<String> {
    let g = guard.map(|g| g.to_string()).unwrap_or_default();
    match s {
        Ok(s) => vec![
            name.into(),
            g,
            num(s.value),
            num(s.ci95.lo),
            num(s.ci95.hi),
            num(s.ci99.lo),
            num(s.ci99.hi),
            s.block_count.to_string(),
            s.replica_count.to_string(),
            s.zero_speed_caveat.to_string(),
            String::new(),
        ],
        Err(e) => {
            let mut row = vec![name.to_string(), g];
            row.extend(std::iter::repeat_n(String::new(), 8));
            row.push(e.to_string());
            row
        }
    }
}

fn estimate_json(s: &Result<SpeedEstimate>) -> Value {
    match s {
        Ok(s) => json!(s),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn speed(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    cfg.validate_run()?;
    let env = cfg.env()?;
    let kernel = cfg.kernel()?;
    let params = cfg.params();
    let diagnostics = env.classify();

    let naive = naive_speed(env, &params);
    let mut guards: Vec<usize> = SENSITIVITY_GUARDS.to_vec();
    if !guards.contains(&cfg.guard) {
        guards.push(cfg.guard);
    }
    guards.sort_unstable();
    let by_guard = regen::guard_sensitivity(env, &params, &guards);
    let main = by_guard
        .iter()
        .find(|(g, _)| *g == cfg.guard)
        .map(|(_, s)| s.clone())
        .expect("configured guard is in the list");

    let mut rows = vec![
        speed_row("naive", None, &naive),
        speed_row("regeneration", Some(cfg.guard), &main),
    ];
    for (g, s) in &by_guard {
        rows.push(speed_row("regeneration-sensitivity", Some(*g), s));
    }

    let mut failure = None;
    let paired = match &kernel {
        None => Value::Null,
        Some(k) => match coupled_speed_pair(k, &params) {
            Ok(pair) => {
                for (name, s) in [
                    ("paired-p", &pair.p),
                    ("paired-q", &pair.q),
                    ("paired-diff", &pair.diff),
                ] {
                    rows.push(speed_row(name, Some(cfg.guard), &Ok(s.clone())));
                }
                json!({
                    "q_env": k.q_env(),
                    "kernel": k.construction(),
                    "p": pair.p,
                    "q": pair.q,
                    "diff": pair.diff,
                    "diff_ci99_excludes_zero": pair.diff.ci99.lo > 0.0,
                    "strict_blocks": pair.strict_blocks,
                })
            }
            Err(e) => {
                rows.push(speed_row("paired-diff", Some(cfg.guard), &Err(e.clone())));
                failure = Some(Failure::from(e.clone()));
                json!({ "error": e.to_string() })
            }
        },
    };
    if let Err(e) = &naive {
        failure = failure.or(Some(Failure::from(e.clone())));
    }
    if let Err(e) = &main {
        failure = failure.or(Some(Failure::from(e.clone())));
    }

    let json = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "speed",
        "diagnostics": diagnostics_json(env, &diagnostics),
        "zero_speed_caveat": !diagnostics.positive_speed(),
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "horizon": cfg.horizon,
        "guard": cfg.guard,
        "resamples": cfg.resamples,
        "naive": estimate_json(&naive),
        "regeneration": estimate_json(&main),
        "guard_sensitivity": by_guard
            .iter()
            .map(|(g, s)| json!({ "guard": g, "estimate": estimate_json(s) }))
            .collect::<Vec<_>>(),
        "paired": paired,
    });
    Ok(Report {
        json,
        header: SPEED_HEADER.to_vec(),
        rows,
        failure,
    })
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    let n = cfg.horizon;
    let o = &cfg.oracle;
    match o.mode {
        OracleMode::Path => {
            let env = cfg.env()?;
            let d = oracle::exact_path_distribution(env, n)?;
            let hit = o.hit.map(|level| {
                let p = d.event_prob(|&b| positions(b, n).contains(&level));
                json!({ "level": level, "probability": p })
            });
            let rows: Vec<Vec<String>> = d
                .atoms
                .iter()
                .map(|(&b, &w)| vec![joined(positions(b, n)), num(w)])
                .collect();
            let dump = o.dump.then(|| {
                d.atoms
                    .iter()
                    .map(|(&b, &w)| json!({ "positions": positions(b, n), "probability": w }))
                    .collect::<Vec<_>>()
            });
            Ok(Report {
                json: json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "oracle",
                    "mode": "path",
                    "env": env,
                    "horizon": n,
                    "atoms": d.len(),
                    "total": d.total(),
                    "hit": hit,
                    "distribution": dump,
                }),
                header: vec!["positions", "probability"],
                rows,
                failure: None,
            })
        }
        OracleMode::Joint => {
            let kernel = kernel_or_identity(cfg)?;
            let d = oracle::exact_coupled_distribution(&kernel, n)?;
            let diagonal = d.atoms.keys().all(|(l, r)| l == r);
            let violating = d
                .atoms
                .keys()
                .filter(|&&(l, r)| {
                    !check_path_order(
                        &WalkPath::from_positions(positions(l, n)),
                        &WalkPath::from_positions(positions(r, n)),
                    )
                    .is_clean()
                })
                .count();
            let lp = oracle::exact_path_distribution(kernel.p_env(), n)?;
            let lq = oracle::exact_path_distribution(kernel.q_env(), n)?;
            let (lm, rm) = (d.left_marginal(), d.right_marginal());
            let marginal_error = (0..1u32 << n)
                .map(|b| {
                    (lm.prob(&b) - lp.prob(&b))
                        .abs()
                        .max((rm.prob(&b) - lq.prob(&b)).abs())
                })
                .fold(0.0, f64::max);
            let rows = d
                .atoms
                .iter()
                .map(|(&(l, r), &w)| vec![joined(positions(l, n)), joined(positions(r, n)), num(w)])
                .collect();
            let dump = o.dump.then(|| {
                d.atoms
                    .iter()
                    .map(|(&(l, r), &w)| {
                        json!({ "l": positions(l, n), "r": positions(r, n), "probability": w })
                    })
                    .collect::<Vec<_>>()
            });
            Ok(Report {
                json: json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "oracle",
                    "mode": "joint",
                    "env": kernel.p_env(),
                    "q_env": kernel.q_env(),
                    "kernel": kernel.construction(),
                    "horizon": n,
                    "atoms": d.len(),
                    "total": d.total(),
                    "diagonal": diagonal,
                    "violating_atoms": violating,
                    "max_marginal_error": marginal_error,
                    "distribution": dump,
                }),
                header: vec!["l_positions", "r_positions", "probability"],
                rows,
                failure: (violating > 0)
                    .then(|| Failure::Violation(format!("{violating} atoms violate path order"))),
            })
        }
        OracleMode::Dominance => {
            let kernel = cfg
                .kernel()?
                .ok_or_else(|| Failure::Validation("dominance mode needs a \"kernel\"".into()))?;
            let rep = oracle::exact_dominance_check(kernel.p_env(), kernel.q_env(), n)?;
            let mut rows = Vec::new();
            for (kind, list) in [
                ("max_tail", &rep.max_tail),
                ("min_tail", &rep.min_tail),
                ("hitting_cdf", &rep.hitting_cdf),
            ] {
                for c in list {
                    rows.push(vec![
                        kind.to_string(),
                        c.threshold.to_string(),
                        c.time.to_string(),
                        num(c.p),
                        num(c.q),
                    ]);
                }
            }
            let violations = rep.violations();
            Ok(Report {
                json: json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "oracle",
                    "mode": "dominance",
                    "env": kernel.p_env(),
                    "q_env": kernel.q_env(),
                    "horizon": n,
                    "holds": rep.holds(),
                    "all_equal": rep.all_equal(),
                    "violations": violations,
                    "tables": o.dump.then_some(&rep),
                }),
                header: vec!["kind", "threshold", "time", "p", "q"],
                rows,
                failure: (!violations.is_empty()).then(|| {
                    Failure::Violation(format!("{} dominance comparisons fail", violations.len()))
                }),
            })
        }
    }
}

const SWEEP_HEADER: [&str; 11] = [
    "form",
    "probs",
    "delta",
    "pbar",
    "theta",
    "classification",
    "speed",
    "speed_ci99_lo",
    "speed_ci99_hi",
    "caveat",
    "error",
];

pub fn sweep(cfg: &ExperimentConfig) -> Result<Report, Failure> {
    if cfg.sweep_speed {
        cfg.validate_run()?;
    }
    let params = cfg.params();
    let mut rows = Vec::with_capacity(cfg.grid.len());
    let mut points = Vec::with_capacity(cfg.grid.len());
    let form_name = json!(cfg.grid_form)
        .as_str()
        .unwrap_or_default()
        .to_string();
    for probs in &cfg.grid {
        let env = match CookieEnvironment::new(cfg.grid_form, probs.clone()) {
            Ok(env) => env,
            Err(e) => {
                let mut row = vec![form_name.clone(), joined(probs)];
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(e.to_string());
                rows.push(row);
                points.push(json!({ "probs": probs, "error": e.to_string() }));
                continue;
            }
        };
        let d = env.classify();
        let mut row = diagnostics_row(&env, &d);
        row.pop();
        let mut point = diagnostics_json(&env, &d);
        if cfg.sweep_speed {
            // every grid point reuses the same seed, so neighbouring points share their cookie draws
            let s = speed_regeneration(&env, &params);
            match &s {
                Ok(s) => row.extend([
                    num(s.value),
                    num(s.ci99.lo),
                    num(s.ci99.hi),
                    s.zero_speed_caveat.to_string(),
                    String::new(),
                ]),
                Err(e) => row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    (!d.positive_speed()).to_string(),
                    e.to_string(),
                ]),
            }
            point["speed"] = estimate_json(&s);
        } else {
            row.extend(std::iter::repeat_n(String::new(), 5));
        }
        rows.push(row);
        points.push(point);
    }
    Ok(Report {
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "sweep",
            "form": cfg.grid_form,
            "sweep_speed": cfg.sweep_speed,
            "seed": cfg.seed,
            "replicas": cfg.replicas,
            "horizon": cfg.horizon,
            "guard": cfg.guard,
            "points": points,
        }),
        header: SWEEP_HEADER.to_vec(),
        rows,
        failure: None,
    })
}
