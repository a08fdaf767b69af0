use erw_core::oracle::{exact_coupled_distribution, exact_dominance_check, positions};
use erw_core::{check_path_order, Construction, CookieEnvironment, CouplingKernel, WalkPath};

fn fin(p: &[f64]) -> CookieEnvironment {
    CookieEnvironment::finite(p.to_vec()).unwrap()
}

fn check_all_atoms(k: &CouplingKernel, n: usize) {
    let joint = exact_coupled_distribution(k, n).unwrap();
    assert!((joint.total() - 1.0).abs() < 1e-12);
    for (&(l, r), &w) in &joint.atoms {
        assert!(w > 0.0);
        let lp = WalkPath::from_positions(positions(l, n));
        let rp = WalkPath::from_positions(positions(r, n));
        let rep = check_path_order(&lp, &rp);
        assert!(
            rep.is_clean(),
            "{:?}: {:?}",
            k.construction(),
            rep.violations
        );
    }
}

#[test]
fn every_atom_is_ordered() {
    let kernels = [
        CouplingKernel::new(fin(&[0.7, 0.9]), Construction::swap(1, 2)).unwrap(),
        CouplingKernel::new(fin(&[0.9]), Construction::pointwise(fin(&[0.95]))).unwrap(),
        CouplingKernel::new(fin(&[0.1, 0.5, 0.9]), Construction::swap(1, 3)).unwrap(),
        CouplingKernel::new(
            CookieEnvironment::periodic([0.3, 0.8]).unwrap(),
            Construction::swap(1, 2),
        )
        .unwrap(),
    ];
    for k in &kernels {
        check_all_atoms(k, 8);
    }
}

#[test]
fn identity_joint_has_diagonal_support() {
    let k = CouplingKernel::identity(fin(&[0.6, 0.2]));
    let joint = exact_coupled_distribution(&k, 4).unwrap();
    assert!(joint.atoms.keys().all(|(l, r)| l == r));
}

#[test]
fn law_level_dominance_for_supported_pairs() {
    let pairs = [
        (fin(&[0.9]), fin(&[0.95])),
        (fin(&[0.7, 0.9]), fin(&[0.9, 0.7])),
        (fin(&[0.3, 0.5, 0.8]), fin(&[0.8, 0.5, 0.3])),
        (fin(&[0.6, 0.6]), fin(&[0.7, 0.65])),
    ];
    for (p, q) in &pairs {
        let rep = exact_dominance_check(p, q, 12).unwrap();
        assert!(rep.holds(), "{p} vs {q}: {:?}", rep.violations());
    }
    let p = fin(&[0.9, 0.9, 0.9]);
    assert!(exact_dominance_check(&p, &p, 14).unwrap().all_equal());
}
