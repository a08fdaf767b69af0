use erw_core::coupling::{prefix_dominated, product_law};
use erw_core::oracle::{exact_coupled_distribution, exact_path_distribution};
use erw_core::{Construction, CookieEnvironment, CouplingKernel, SeedKey};

fn fin(p: &[f64]) -> CookieEnvironment {
    CookieEnvironment::finite(p.to_vec()).unwrap()
}

fn per(p: &[f64]) -> CookieEnvironment {
    CookieEnvironment::periodic(p.to_vec()).unwrap()
}

fn kernels() -> Vec<CouplingKernel> {
    vec![
        CouplingKernel::identity(fin(&[0.8, 0.3])),
        CouplingKernel::new(
            fin(&[0.9, 0.9, 0.9]),
            Construction::pointwise(fin(&[0.95, 0.9, 0.9])),
        )
        .unwrap(),
        CouplingKernel::new(fin(&[0.3, 0.7]), Construction::swap(1, 2)).unwrap(),
        CouplingKernel::new(fin(&[0.7, 0.9, 0.9]), Construction::swap(1, 2)).unwrap(),
        CouplingKernel::new(fin(&[0.2, 0.4, 0.6, 0.8]), Construction::swap(2, 4)).unwrap(),
        CouplingKernel::new(fin(&[0.4]), Construction::swap(1, 3)).unwrap(),
        CouplingKernel::new(per(&[0.4, 0.6]), Construction::swap(1, 2)).unwrap(),
        CouplingKernel::new(per(&[0.6, 0.4]), Construction::pointwise(per(&[0.7, 0.45]))).unwrap(),
        CouplingKernel::new(
            fin(&[0.7, 0.9, 0.9]),
            Construction::compose(vec![
                Construction::swap(1, 2),
                Construction::pointwise(fin(&[0.95, 0.8, 0.9])),
            ]),
        )
        .unwrap(),
    ]
}

#[test]
fn marginals_are_product_laws() {
    for k in kernels() {
        for depth in 1..=8 {
            let t = k.exact_joint_distribution(depth).unwrap();
            assert!((t.total() - 1.0).abs() < 1e-12);
            let py = product_law(k.p_env(), depth);
            let pz = product_law(k.q_env(), depth);
            for (bits, w) in t.y_marginal() {
                assert!(
                    (w - py[&bits]).abs() < 1e-12,
                    "{:?} Y depth {depth}",
                    k.construction()
                );
            }
            for (bits, w) in t.z_marginal() {
                assert!(
                    (w - pz[&bits]).abs() < 1e-12,
                    "{:?} Z depth {depth}",
                    k.construction()
                );
            }
            let support_y: f64 = t.y_marginal().values().sum();
            assert!((support_y - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn joint_support_is_dominated() {
    for k in kernels() {
        let t = k.exact_joint_distribution(8).unwrap();
        for (&(y, z), &w) in &t.atoms {
            if w > 0.0 {
                let ys: Vec<bool> = (0..8).map(|i| y >> i & 1 == 1).collect();
                let zs: Vec<bool> = (0..8).map(|i| z >> i & 1 == 1).collect();
                assert!(prefix_dominated(&ys, &zs));
            }
        }
    }
}

#[test]
fn coupled_oracle_marginals_match_single_walk_oracle() {
    for k in kernels() {
        let n = 7;
        let joint = exact_coupled_distribution(&k, n).unwrap();
        let lp = exact_path_distribution(k.p_env(), n).unwrap();
        let lq = exact_path_distribution(k.q_env(), n).unwrap();
        let (lm, rm) = (joint.left_marginal(), joint.right_marginal());
        for b in 0..1u32 << n {
            assert!((lm.prob(&b) - lp.prob(&b)).abs() < 1e-10);
            assert!((rm.prob(&b) - lq.prob(&b)).abs() < 1e-10);
        }
    }
}

#[test]
fn strict_frequency_matches_oracle() {
    let samples = 200_000u64;
    for k in kernels().into_iter().filter(|k| !k.is_identity()) {
        let depth = 6;
        let exact = k
            .exact_joint_distribution(depth)
            .unwrap()
            .strict_somewhere();
        let hits = (0..samples)
            .filter(|&r| {
                let (ys, zs) = k.sample_site_pair(SeedKey::new(77, r), 0, depth);
                let (mut sy, mut sz) = (0, 0);
                ys.iter().zip(&zs).any(|(&y, &z)| {
                    sy += y as i32;
                    sz += z as i32;
                    sy < sz
                })
            })
            .count();
        let freq = hits as f64 / samples as f64;
        let se = (exact * (1.0 - exact) / samples as f64).sqrt();
        assert!(exact > 0.0);
        assert!(
            (freq - exact).abs() <= 3.0 * se,
            "{:?}: observed {freq}, exact {exact}",
            k.construction()
        );
    }
}

#[test]
fn sampled_marginals_match_product_law() {
    let k = CouplingKernel::new(fin(&[0.2, 0.4, 0.6, 0.8]), Construction::swap(2, 4)).unwrap();
    let samples = 200_000u64;
    let mut ones = [0u64; 4];
    for r in 0..samples {
        let (_, zs) = k.sample_site_pair(SeedKey::new(78, r), 5, 4);
        for (c, z) in ones.iter_mut().zip(zs) {
            *c += z as u64;
        }
    }
    for (i, &q) in [0.2, 0.8, 0.6, 0.4].iter().enumerate() {
        let freq = ones[i] as f64 / samples as f64;
        let se = (q * (1.0 - q) / samples as f64).sqrt();
        assert!((freq - q).abs() < 4.0 * se, "cell {}: {freq} vs {q}", i + 1);
    }
}
